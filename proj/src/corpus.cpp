#include "harmony/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "harmony/error.hpp"

namespace fs = std::filesystem;

namespace harmony {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

[[noreturn]] void bad_line(std::size_t lineno, const std::string& why) {
    fail(ErrorCode::SchemaMismatch, "manifest line " + std::to_string(lineno) + ": " + why);
}

// Smoothly interpolated lattice noise in [-1, 1].
class ValueNoise {
public:
    ValueNoise(std::uint64_t seed, double cell) : seed_(seed), cell_(cell) {}

    double operator()(double x, double y) const {
        const double gx = x / cell_;
        const double gy = y / cell_;
        const auto x0 = static_cast<std::int64_t>(std::floor(gx));
        const auto y0 = static_cast<std::int64_t>(std::floor(gy));
        const double tx = smooth(gx - static_cast<double>(x0));
        const double ty = smooth(gy - static_cast<double>(y0));
        const double v00 = lattice(x0, y0), v10 = lattice(x0 + 1, y0);
        const double v01 = lattice(x0, y0 + 1), v11 = lattice(x0 + 1, y0 + 1);
        const double top = v00 + (v10 - v00) * tx;
        const double bottom = v01 + (v11 - v01) * tx;
        return top + (bottom - top) * ty;
    }

private:
    static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

    double lattice(std::int64_t x, std::int64_t y) const {
        const std::uint64_t h = mix64(seed_ ^ mix64(static_cast<std::uint64_t>(x) * 0x9E3779B97F4A7C15ULL +
                                                    static_cast<std::uint64_t>(y)));
        return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    }

    std::uint64_t seed_;
    double cell_;
};

std::string item_id(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "proc_%05d", index);
    return buf;
}

LabelMap voronoi_layout(int width, int height, const std::vector<int>& class_ids, int background_cells, Rng& rng) {
    struct Site {
        double x, y;
        int label;
    };
    std::vector<Site> sites;
    for (int id : class_ids) sites.push_back({rng.uniform(0, width), rng.uniform(0, height), id});
    for (int i = 0; i < background_cells; ++i) {
        sites.push_back({rng.uniform(0, width), rng.uniform(0, height), LabelMap::kBackground});
    }
    const ValueNoise warp_x(rng.next_u64(), width / 6.0);
    const ValueNoise warp_y(rng.next_u64(), width / 6.0);
    const double warp = width / 14.0;
    LabelMap labels(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double px = x + warp * warp_x(x, y);
            const double py = y + warp * warp_y(x, y);
            double best = 1e300;
            int label = LabelMap::kBackground;
            for (const auto& s : sites) {
                const double d = (px - s.x) * (px - s.x) + (py - s.y) * (py - s.y);
                if (d < best) {
                    best = d;
                    label = s.label;
                }
            }
            labels.set(x, y, label);
        }
    }
    return labels;
}

}  // namespace

std::string Manifest::resolve(const std::string& path) const {
    const fs::path p(path);
    return p.is_absolute() ? p.string() : (fs::path(base_dir) / p).string();
}

Manifest parse_manifest(const std::string& text, const std::string& base_dir, bool check_paths) {
    Manifest m;
    m.base_dir = base_dir;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto tok = tokenize(line);
        if (tok.empty()) continue;
        if (!header) {
            if (tok.size() != 2 || tok[0] != "harmony-manifest") bad_line(lineno, "expected 'harmony-manifest <version>'");
            if (tok[1] != std::to_string(kManifestSchema)) bad_line(lineno, "unsupported schema version " + tok[1]);
            header = true;
            continue;
        }
        const std::string& key = tok[0];
        try {
            if (key == "seed" && tok.size() == 2) {
                m.seed = std::stoull(tok[1]);
            } else if (key == "perturb_config" && tok.size() == 2) {
                m.perturb_config = tok[1];
            } else if (key == "split" && tok.size() == 3) {
                m.declared.emplace_back(tok[1], static_cast<std::size_t>(std::stoull(tok[2])));
            } else if (key == "source" && tok.size() == 4) {
                m.sources.push_back({tok[1], tok[2], tok[3]});
            } else if (key == "sample" && tok.size() == 6) {
                m.samples.push_back({tok[1], tok[2], tok[3], tok[4], tok[5]});
            } else {
                bad_line(lineno, "unrecognized entry '" + key + "' with " + std::to_string(tok.size() - 1) + " field(s)");
            }
        } catch (const std::logic_error&) {
            bad_line(lineno, "invalid number");
        }
    }
    if (!header) fail(ErrorCode::SchemaMismatch, "manifest is missing its 'harmony-manifest' header");

    for (const auto& sc : stats(m)) {
        if (sc.declared && sc.listed > 0 && *sc.declared != sc.listed) {
            fail(ErrorCode::SchemaMismatch, "split '" + sc.split + "' declares " + std::to_string(*sc.declared) +
                                                " entries but lists " + std::to_string(sc.listed));
        }
    }
    if (check_paths) {
        auto check = [&](const std::string& p) {
            if (!fs::exists(m.resolve(p))) fail(ErrorCode::DanglingPath, "manifest path does not exist: " + p);
        };
        for (const auto& s : m.sources) {
            check(s.image);
            check(s.labels);
        }
        for (const auto& s : m.samples) {
            check(s.real);
            check(s.composite);
            check(s.labels);
            check(s.records);
        }
        if (m.perturb_config) check(*m.perturb_config);
    }
    return m;
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::MissingFile, "cannot open manifest '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_manifest(buf.str(), fs::path(path).parent_path().string());
}

std::string format_manifest(const Manifest& m) {
    std::ostringstream out;
    out << "harmony-manifest " << m.schema << '\n';
    out << "seed " << m.seed << '\n';
    if (m.perturb_config) out << "perturb_config " << *m.perturb_config << '\n';
    for (const auto& [split, n] : m.declared) out << "split " << split << ' ' << n << '\n';
    for (const auto& s : m.sources) out << "source " << s.split << ' ' << s.image << ' ' << s.labels << '\n';
    for (const auto& s : m.samples) {
        out << "sample " << s.split << ' ' << s.real << ' ' << s.composite << ' ' << s.labels << ' ' << s.records << '\n';
    }
    return out.str();
}

void save_manifest(const Manifest& manifest, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write manifest '" + path + "'");
    out << format_manifest(manifest);
}

std::vector<SplitCount> stats(const Manifest& m) {
    std::vector<SplitCount> out;
    auto slot = [&](const std::string& split) -> SplitCount& {
        for (auto& s : out) {
            if (s.split == split) return s;
        }
        out.push_back({split, std::nullopt, 0});
        return out.back();
    };
    for (const auto& [split, n] : m.declared) slot(split).declared = n;
    for (const auto& s : m.sources) ++slot(s.split).listed;
    for (const auto& s : m.samples) ++slot(s.split).listed;
    return out;
}

std::size_t total_count(const std::vector<SplitCount>& counts) {
    std::size_t n = 0;
    for (const auto& c : counts) n += c.count();
    return n;
}

CorpusItem gen_procedural_item(int index, int width, int height, std::uint64_t seed, const ProceduralOptions& opts) {
    if (width < 16 || height < 16) fail(ErrorCode::InvalidArgument, "procedural images must be at least 16x16");
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
    const int k = opts.min_classes + static_cast<int>(rng.below(static_cast<std::uint64_t>(opts.max_classes - opts.min_classes + 1)));

    // Distinct class ids in [1,150], scene-parsing style.
    std::vector<int> pool(150);
    for (int i = 0; i < 150; ++i) pool[i] = i + 1;
    for (int i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(static_cast<std::uint64_t>(150 - i))]);
    std::vector<int> class_ids(pool.begin(), pool.begin() + k);

    const std::size_t min_area = static_cast<std::size_t>(std::ceil(opts.min_area_fraction * width * height));
    LabelMap labels;
    for (int attempt = 0;; ++attempt) {
        labels = voronoi_layout(width, height, class_ids, 3, rng);
        bool ok = labels.area(LabelMap::kBackground) >= min_area;
        for (int id : class_ids) ok = ok && labels.area(id) >= min_area;
        if (ok) break;
        if (attempt == 200) fail(ErrorCode::InvalidArgument, "could not lay out regions; image too small for the class count");
    }

    // One stationary LAB texture over the whole image plus a faint per-class tint.
    const double base_l = rng.uniform(45.0, 60.0);
    const double base_a = rng.uniform(-15.0, 15.0);
    const double base_b = rng.uniform(-15.0, 15.0);
    std::array<ValueNoise, 3> fine{ValueNoise(rng.next_u64(), 6.0), ValueNoise(rng.next_u64(), 6.0),
                                   ValueNoise(rng.next_u64(), 6.0)};
    std::array<ValueNoise, 3> coarse{ValueNoise(rng.next_u64(), 28.0), ValueNoise(rng.next_u64(), 28.0),
                                     ValueNoise(rng.next_u64(), 28.0)};
    const std::array<double, 3> fine_amp{12.0, 9.0, 9.0};
    const std::array<double, 3> coarse_amp{5.0, 4.0, 4.0};
    const double grad_x = rng.uniform(-3.0, 3.0);
    const double grad_y = rng.uniform(-3.0, 3.0);
    std::map<int, std::array<double, 3>> tint;
    for (int id : class_ids) tint[id] = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    tint[LabelMap::kBackground] = {0.0, 0.0, 0.0};

    ImageBuf img(width, height, ColorSpace::SRGB_01);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const auto& t = tint[labels.at(x, y)];
            const double u = static_cast<double>(x) / width - 0.5;
            const double v = static_cast<double>(y) / height - 0.5;
            std::array<float, 3> lab{};
            const std::array<double, 3> base{base_l + grad_x * u + grad_y * v, base_a, base_b};
            for (int c = 0; c < 3; ++c) {
                lab[c] = static_cast<float>(base[c] + fine_amp[c] * fine[c](x, y) + coarse_amp[c] * coarse[c](x, y) + t[c]);
            }
            auto rgb = color::lab_to_srgb(lab);
            for (int c = 0; c < 3; ++c) img.at(c, x, y) = std::clamp(rgb[c], 0.0f, 1.0f);
        }
    }
    return {item_id(index), quantize_8bit(img), std::move(labels)};
}

std::vector<CorpusItem> gen_procedural_corpus(int n, int width, int height, std::uint64_t seed,
                                              const ProceduralOptions& opts) {
    if (n < 1) fail(ErrorCode::InvalidArgument, "corpus size must be >= 1");
    std::vector<CorpusItem> items;
    items.reserve(n);
    for (int i = 0; i < n; ++i) items.push_back(gen_procedural_item(i, width, height, seed, opts));
    return items;
}

nlohmann::json records_to_json(const BenchmarkSample& sample) {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : sample.records) recs.push_back(record_to_json(r));
    return {{"schema", kRecordsSchema},
            {"id", sample.id},
            {"width", sample.composite.width()},
            {"height", sample.composite.height()},
            {"records", recs}};
}

std::vector<PerturbRecord> records_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("schema", "") != kRecordsSchema) {
        fail(ErrorCode::SchemaMismatch, std::string("records file must declare schema ") + kRecordsSchema);
    }
    std::vector<PerturbRecord> out;
    for (const auto& r : j.at("records")) out.push_back(record_from_json(r));
    return out;
}

void persist_sample(const BenchmarkSample& sample, const std::string& root) {
    if (sample.id.empty()) fail(ErrorCode::InvalidArgument, "sample id must not be empty");
    std::error_code ec;
    for (const char* sub : {"real", "composite", "labels", "records"}) {
        fs::create_directories(fs::path(root) / sub, ec);
        if (ec) fail(ErrorCode::Io, "cannot create '" + (fs::path(root) / sub).string() + "': " + ec.message());
    }
    const fs::path r(root);
    save_image(sample.real, (r / "real" / (sample.id + ".png")).string());
    save_image(sample.composite, (r / "composite" / (sample.id + ".png")).string());
    save_label_png(sample.labels, (r / "labels" / (sample.id + ".png")).string());
    std::ofstream out(r / "records" / (sample.id + ".json"), std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write records for '" + sample.id + "'");
    out << records_to_json(sample).dump(2) << '\n';
}

BenchmarkSample load_sample(const std::string& root, const std::string& id) {
    const fs::path r(root);
    BenchmarkSample s;
    s.id = id;
    s.real = load_image((r / "real" / (id + ".png")).string());
    s.composite = load_image((r / "composite" / (id + ".png")).string());
    s.labels = decode_label_png((r / "labels" / (id + ".png")).string());
    const fs::path rec_path = r / "records" / (id + ".json");
    std::ifstream in(rec_path);
    if (!in) fail(ErrorCode::MissingFile, "cannot open '" + rec_path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaMismatch, "records for '" + id + "' are not valid JSON: " + e.what());
    }
    s.records = records_from_json(j);
    if (!s.real.same_dims(s.composite) || s.labels.width() != s.real.width() || s.labels.height() != s.real.height()) {
        fail(ErrorCode::DimensionMismatch, "sample '" + id + "' has inconsistent dimensions");
    }
    for (const auto& rec : s.records) {
        if (s.labels.area(rec.region_label) == 0) {
            fail(ErrorCode::SchemaMismatch, "record references label " + std::to_string(rec.region_label) +
                                                " absent from the label map of '" + id + "'");
        }
    }
    return s;
}

std::vector<std::string> list_samples(const std::string& root) {
    std::vector<std::string> ids;
    const fs::path dir = fs::path(root) / "composite";
    if (!fs::is_directory(dir)) return ids;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") ids.push_back(e.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<LabeledRegion> regions_from_records(const LabelMap& labels, const std::vector<PerturbRecord>& records) {
    std::vector<int> order;
    for (const auto& r : records) {
        if (std::find(order.begin(), order.end(), r.region_label) == order.end()) order.push_back(r.region_label);
    }
    if (order.empty()) return {};
    return regions_from_labels(labels, order);
}

}  // namespace harmony
