#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>

#include <jpeglib.h>

#include "harmony/error.hpp"
#include "harmony/image.hpp"

namespace harmony {

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::MissingFile, "cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const unsigned char> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::Io, "short write to '" + path + "'");
}

std::vector<unsigned char> interleave_8bit(const ImageBuf& img) {
    if (img.space() != ColorSpace::SRGB_01) {
        fail(ErrorCode::InvalidSpace, "only SRGB_01 images can be encoded");
    }
    const std::size_t n = img.pixel_count();
    std::vector<unsigned char> rgb(n * 3);
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            const float v = std::clamp(img.plane(c)[i], 0.0f, 1.0f);
            rgb[i * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0f));
        }
    }
    return rgb;
}

ImageBuf from_interleaved(const unsigned char* rgb, int width, int height) {
    ImageBuf img(width, height, ColorSpace::SRGB_01);
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) img.plane(c)[i] = rgb[i * 3 + c] / 255.0f;
    }
    return img;
}

bool is_png(std::span<const unsigned char> bytes) {
    return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

bool is_jpeg(std::span<const unsigned char> bytes) {
    return bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF;
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

struct PngMemoryReader {
    std::span<const unsigned char> bytes;
    std::size_t offset = 0;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t count) {
    auto* reader = static_cast<PngMemoryReader*>(png_get_io_ptr(png));
    if (reader->offset + count > reader->bytes.size()) png_error(png, "truncated PNG");
    std::memcpy(out, reader->bytes.data() + reader->offset, count);
    reader->offset += count;
}

}  // namespace

std::vector<unsigned char> encode_png(const ImageBuf& img) {
    auto rgb = interleave_8bit(img);
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, rgb.data(), 0, nullptr)) {
        fail(ErrorCode::Io, std::string("PNG encode failed: ") + image.message);
    }
    std::vector<unsigned char> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, rgb.data(), 0, nullptr)) {
        fail(ErrorCode::Io, std::string("PNG encode failed: ") + image.message);
    }
    out.resize(size);
    return out;
}

ImageBuf decode_png(std::span<const unsigned char> bytes) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        fail(ErrorCode::DecodeFailure, std::string("PNG decode failed: ") + image.message);
    }
    if (image.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&image);
        fail(ErrorCode::UnsupportedBitDepth, "unsupported bit depth: only 8-bit PNG is accepted");
    }
    // Alpha is dropped, not composited.
    image.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> rgb(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
        fail(ErrorCode::DecodeFailure, std::string("PNG decode failed: ") + image.message);
    }
    return from_interleaved(rgb.data(), static_cast<int>(image.width), static_cast<int>(image.height));
}

std::vector<unsigned char> encode_jpeg(const ImageBuf& img, int quality) {
    if (quality < 1 || quality > 100) fail(ErrorCode::InvalidArgument, "JPEG quality must be in [1,100]");
    auto rgb = interleave_8bit(img);

    jpeg_compress_struct cinfo;
    JpegErrorManager err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    unsigned char* buffer = nullptr;
    unsigned long size = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        std::free(buffer);
        fail(ErrorCode::Io, std::string("JPEG encode failed: ") + err.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &buffer, &size);
    cinfo.image_width = static_cast<JDIMENSION>(img.width());
    cinfo.image_height = static_cast<JDIMENSION>(img.height());
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    const std::size_t stride = static_cast<std::size_t>(img.width()) * 3;
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = rgb.data() + cinfo.next_scanline * stride;
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    std::vector<unsigned char> out(buffer, buffer + size);
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    return out;
}

ImageBuf decode_jpeg(std::span<const unsigned char> bytes) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    std::vector<unsigned char> rgb;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        fail(ErrorCode::DecodeFailure, std::string("JPEG decode failed: ") + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const int width = static_cast<int>(cinfo.output_width);
    const int height = static_cast<int>(cinfo.output_height);
    const std::size_t stride = static_cast<std::size_t>(width) * 3;
    rgb.resize(stride * height);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = rgb.data() + cinfo.output_scanline * stride;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return from_interleaved(rgb.data(), width, height);
}

ImageBuf load_image(const std::string& path) {
    const auto bytes = read_file(path);
    if (is_png(bytes)) return decode_png(bytes);
    if (is_jpeg(bytes)) return decode_jpeg(bytes);
    fail(ErrorCode::DecodeFailure, "'" + path + "' is neither PNG nor JPEG");
}

void save_image(const ImageBuf& img, const std::string& path, ImageFormat format, int jpeg_quality) {
    const auto bytes = format == ImageFormat::PNG ? encode_png(img) : encode_jpeg(img, jpeg_quality);
    write_file(path, bytes);
}

GrayRaster load_gray_png(const std::string& path) {
    const auto bytes = read_file(path);
    if (!is_png(bytes)) fail(ErrorCode::DecodeFailure, "'" + path + "' is not a PNG");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail(ErrorCode::DecodeFailure, "libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail(ErrorCode::DecodeFailure, "libpng init failed");
    }
    PngMemoryReader reader{bytes, 0};
    GrayRaster raster;
    std::vector<png_bytep> rows;
    // 0 = ok, 1 = libpng error, 2 = rejected encoding, 3 = rejected bit depth
    volatile int status = 0;
    if (setjmp(png_jmpbuf(png))) {
        status = 1;
    } else {
        png_set_read_fn(png, &reader, png_read_from_memory);
        png_read_info(png, info);
        const int color_type = png_get_color_type(png, info);
        const int bit_depth = png_get_bit_depth(png, info);
        if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_PALETTE) {
            status = 2;
        } else if (bit_depth > 8) {
            status = 3;
        } else {
            if (bit_depth < 8) png_set_packing(png);
            png_read_update_info(png, info);
            raster.width = static_cast<int>(png_get_image_width(png, info));
            raster.height = static_cast<int>(png_get_image_height(png, info));
            raster.values.resize(static_cast<std::size_t>(raster.width) * raster.height);
            rows.resize(raster.height);
            for (int y = 0; y < raster.height; ++y) {
                rows[y] = raster.values.data() + static_cast<std::size_t>(y) * raster.width;
            }
            png_read_image(png, rows.data());
            png_read_end(png, nullptr);
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    switch (status) {
        case 1: fail(ErrorCode::DecodeFailure, "label PNG decode failed: '" + path + "'");
        case 2:
            fail(ErrorCode::UnsupportedEncoding,
                 "unsupported label encoding in '" + path + "': expected grayscale or palette PNG");
        case 3: fail(ErrorCode::UnsupportedBitDepth, "unsupported bit depth in label '" + path + "'");
        default: break;
    }
    return raster;
}

void save_gray_png(const GrayRaster& raster, const std::string& path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(raster.width);
    image.height = static_cast<png_uint_32>(raster.height);
    image.format = PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, raster.values.data(), 0, nullptr)) {
        fail(ErrorCode::Io, std::string("PNG encode failed: ") + image.message);
    }
    std::vector<unsigned char> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, raster.values.data(), 0, nullptr)) {
        fail(ErrorCode::Io, std::string("PNG encode failed: ") + image.message);
    }
    out.resize(size);
    write_file(path, out);
}

}  // namespace harmony
