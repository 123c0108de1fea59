#include "mulcon/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "mulcon/rng.hpp"

namespace mulcon {

void GlyphDatasetConfig::validate() const {
    if (num_classes < 2) throw std::invalid_argument("dataset: at least two classes required");
    if (image_size < 16) throw std::invalid_argument("dataset: image size too small");
    if (min_objects < 1 || max_objects < min_objects || max_objects > num_classes)
        throw std::invalid_argument("dataset: invalid object count range");
    if (min_scale < 2.0 || max_scale < min_scale || max_scale > image_size)
        throw std::invalid_argument("dataset: invalid glyph scale range");
    if (train_count < 1 || test_count < 1) throw std::invalid_argument("dataset: empty split");
}

AugmentConfig light_augment(const AugmentConfig& base) {
    AugmentConfig a = base;
    a.max_translate = 0;
    a.noise_sigma = 0.0;
    return a;
}

namespace {

constexpr double kBackgroundGray = 0.30;
constexpr double kGlyphSaturation = 0.85;

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
    double c = v * s;
    double hp = h / 60.0;
    double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) {
        r = c; g = x;
    } else if (hp < 2) {
        r = x; g = c;
    } else if (hp < 3) {
        g = c; b = x;
    } else if (hp < 4) {
        g = x; b = c;
    } else if (hp < 5) {
        r = x; b = c;
    } else {
        r = c; b = x;
    }
    double m = v - c;
    rgb[0] = r + m;
    rgb[1] = g + m;
    rgb[2] = b + m;
}

// pixel-center inside test for each of the eight base shapes; classes beyond
// eight reuse shapes with distinct hues
bool inside_glyph(const GlyphSpec& g, double px, double py) {
    double dx = px - g.cx, dy = py - g.cy;
    double half = g.size * 0.5;
    switch (g.cls % 8) {
        case 0:  // disk
            return dx * dx + dy * dy <= half * half;
        case 1:  // square
            return std::abs(dx) <= half && std::abs(dy) <= half;
        case 2: {  // triangle, apex up
            if (dy < -half || dy > half) return false;
            double halfwidth = (dy + half) * 0.5;
            return std::abs(dx) <= halfwidth;
        }
        case 3:  // cross
            return (std::abs(dx) <= g.size / 6.0 && std::abs(dy) <= half) ||
                   (std::abs(dy) <= g.size / 6.0 && std::abs(dx) <= half);
        case 4: {  // ring
            double r2 = dx * dx + dy * dy;
            double inner = std::max(1.0, half - std::max(2.0, g.size / 6.0));
            return r2 <= half * half && r2 >= inner * inner;
        }
        case 5:  // horizontal bar
            return std::abs(dy) <= g.size / 6.0 && std::abs(dx) <= half;
        case 6:  // vertical bar
            return std::abs(dx) <= g.size / 6.0 && std::abs(dy) <= half;
        default:  // diamond
            return std::abs(dx) + std::abs(dy) <= half;
    }
}

double bbox_overlap(const GlyphSpec& a, const GlyphSpec& b) {
    double ax0 = a.cx - a.size / 2, ax1 = a.cx + a.size / 2;
    double ay0 = a.cy - a.size / 2, ay1 = a.cy + a.size / 2;
    double bx0 = b.cx - b.size / 2, bx1 = b.cx + b.size / 2;
    double by0 = b.cy - b.size / 2, by1 = b.cy + b.size / 2;
    double ix = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
    double iy = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
    double inter = ix * iy;
    double uni = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter;
    return uni > 0 ? inter / uni : 0.0;
}

std::vector<GlyphSpec> sample_glyphs(const GlyphDatasetConfig& cfg, Rng& rng) {
    int k = rng.uniform_int(cfg.min_objects, cfg.max_objects);
    std::vector<int> classes(static_cast<size_t>(cfg.num_classes));
    for (int c = 0; c < cfg.num_classes; ++c) classes[static_cast<size_t>(c)] = c;
    rng.shuffle(classes);

    std::vector<GlyphSpec> specs;
    for (int gi = 0; gi < k; ++gi) {
        GlyphSpec g;
        g.cls = classes[static_cast<size_t>(gi)];
        g.size = rng.uniform(cfg.min_scale, cfg.max_scale);
        g.brightness = 1.0 - cfg.brightness_jitter * rng.uniform();
        double half = g.size * 0.5;
        // keep the glyph fully inside and mostly clear of earlier ones
        for (int attempt = 0; attempt < 40; ++attempt) {
            g.cx = rng.uniform(half, cfg.image_size - half);
            g.cy = rng.uniform(half, cfg.image_size - half);
            double worst = 0.0;
            for (const auto& other : specs) worst = std::max(worst, bbox_overlap(g, other));
            if (worst <= 0.25) break;
        }
        specs.push_back(g);
    }
    return specs;
}

void render_image(const std::vector<GlyphSpec>& specs, const GlyphDatasetConfig& cfg, Rng& rng,
                  uint8_t* out) {
    const int sz = cfg.image_size;
    std::vector<double> img(static_cast<size_t>(sz) * sz * 3);
    for (double& v : img) v = kBackgroundGray + cfg.noise_sigma * rng.normal();

    for (const auto& g : specs) {
        double rgb[3];
        hsv_to_rgb(360.0 * g.cls / cfg.num_classes, kGlyphSaturation, g.brightness, rgb);
        int x0 = std::max(0, static_cast<int>(std::floor(g.cx - g.size / 2)));
        int x1 = std::min(sz - 1, static_cast<int>(std::ceil(g.cx + g.size / 2)));
        int y0 = std::max(0, static_cast<int>(std::floor(g.cy - g.size / 2)));
        int y1 = std::min(sz - 1, static_cast<int>(std::ceil(g.cy + g.size / 2)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
                if (inside_glyph(g, x + 0.5, y + 0.5)) {
                    double* px = img.data() + (static_cast<size_t>(y) * sz + x) * 3;
                    px[0] = rgb[0];
                    px[1] = rgb[1];
                    px[2] = rgb[2];
                }
    }
    for (size_t i = 0; i < img.size(); ++i) {
        double v = std::min(1.0, std::max(0.0, img[i]));
        out[i] = static_cast<uint8_t>(std::lround(v * 255.0));
    }
}

}  // namespace

std::vector<uint8_t> labels_from_glyphs(const std::vector<GlyphSpec>& specs, int num_classes) {
    std::vector<uint8_t> y(static_cast<size_t>(num_classes), 0);
    for (const auto& g : specs) y[static_cast<size_t>(g.cls)] = 1;
    return y;
}

GlyphDataset gen_dataset(const GlyphDatasetConfig& cfg, Split split) {
    cfg.validate();
    GlyphDataset ds;
    ds.count = split == Split::Train ? cfg.train_count : cfg.test_count;
    ds.num_classes = cfg.num_classes;
    ds.height = cfg.image_size;
    ds.width = cfg.image_size;
    ds.pixels.resize(static_cast<size_t>(ds.count) * ds.height * ds.width * 3);
    ds.labels.resize(static_cast<size_t>(ds.count) * ds.num_classes);
    ds.glyphs.resize(static_cast<size_t>(ds.count));

    const uint64_t split_tag = split == Split::Train ? 1 : 2;
    for (int i = 0; i < ds.count; ++i) {
        Rng rng(derive_seed(cfg.seed, split_tag, static_cast<uint64_t>(i)));
        auto specs = sample_glyphs(cfg, rng);
        render_image(specs, cfg, rng,
                     ds.pixels.data() + static_cast<size_t>(i) * ds.height * ds.width * 3);
        auto y = labels_from_glyphs(specs, cfg.num_classes);
        std::copy(y.begin(), y.end(), ds.labels.begin() + static_cast<size_t>(i) * cfg.num_classes);
        ds.glyphs[static_cast<size_t>(i)] = std::move(specs);
    }
    return ds;
}

std::vector<double> GlyphDataset::image_as_double(int i) const {
    const uint8_t* src = image(i);
    std::vector<double> out(static_cast<size_t>(height) * width * 3);
    for (size_t t = 0; t < out.size(); ++t) out[t] = src[t] / 255.0;
    return out;
}

void flip_horizontal(std::vector<double>& img, int h, int w) {
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w / 2; ++x)
            for (int c = 0; c < 3; ++c)
                std::swap(img[(static_cast<size_t>(y) * w + x) * 3 + c],
                          img[(static_cast<size_t>(y) * w + (w - 1 - x)) * 3 + c]);
}

std::vector<double> augment(const std::vector<double>& img, int h, int w, const AugmentConfig& cfg,
                            uint64_t seed) {
    Rng rng(seed);
    std::vector<double> out = img;
    if (rng.bernoulli(cfg.flip_prob)) flip_horizontal(out, h, w);
    if (cfg.max_translate > 0) {
        int dx = rng.uniform_int(-cfg.max_translate, cfg.max_translate);
        int dy = rng.uniform_int(-cfg.max_translate, cfg.max_translate);
        if (dx != 0 || dy != 0) {
            std::vector<double> shifted(out.size(), 0.0);
            for (int y = 0; y < h; ++y) {
                int sy = y - dy;
                if (sy < 0 || sy >= h) continue;
                for (int x = 0; x < w; ++x) {
                    int sx = x - dx;
                    if (sx < 0 || sx >= w) continue;
                    for (int c = 0; c < 3; ++c)
                        shifted[(static_cast<size_t>(y) * w + x) * 3 + c] =
                            out[(static_cast<size_t>(sy) * w + sx) * 3 + c];
                }
            }
            out = std::move(shifted);
        }
    }
    if (cfg.noise_sigma > 0.0)
        for (double& v : out) v = std::min(1.0, std::max(0.0, v + cfg.noise_sigma * rng.normal()));
    return out;
}

BatchStream::BatchStream(const GlyphDataset& data, int batch_size, uint64_t master_seed, int epoch,
                         AugmentMode mode, const AugmentConfig& aug)
    : data_(data), batch_size_(batch_size), master_seed_(master_seed), epoch_(epoch), mode_(mode), aug_(aug) {
    if (batch_size < 1 || batch_size > data.count)
        throw std::invalid_argument("batches: batch size " + std::to_string(batch_size) +
                                    " for split of " + std::to_string(data.count));
    order_.resize(static_cast<size_t>(data.count));
    for (int i = 0; i < data.count; ++i) order_[static_cast<size_t>(i)] = i;
    Rng shuffle_rng(derive_seed(master_seed, name_hash("shuffle"), static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order_);
}

LabeledImageBatch BatchStream::get(size_t b) const {
    if (b >= size()) throw std::out_of_range("batches: batch index out of range");
    const int h = data_.height, w = data_.width, l = data_.num_classes;
    const int copies = mode_ == AugmentMode::Pair ? 2 : 1;
    const int n = batch_size_ * copies;

    LabeledImageBatch batch;
    batch.n = n;
    batch.num_labels = l;
    batch.images = Tensor::create({n, h, w, 3});
    batch.labels.resize(static_cast<size_t>(n) * l);
    batch.indices.resize(static_cast<size_t>(n));

    AugmentConfig light = light_augment(aug_);
    for (int copy = 0; copy < copies; ++copy) {
        const AugmentConfig* cfg = nullptr;
        switch (mode_) {
            case AugmentMode::None:
                break;
            case AugmentMode::Light:
                cfg = &light;
                break;
            case AugmentMode::Full:
                cfg = &aug_;
                break;
            case AugmentMode::Pair:
                cfg = copy == 0 ? &light : &aug_;
                break;
        }
        for (int s = 0; s < batch_size_; ++s) {
            int row = order_[b * static_cast<size_t>(batch_size_) + static_cast<size_t>(s)];
            int slot = copy * batch_size_ + s;
            auto img = data_.image_as_double(row);
            if (cfg)
                img = augment(img, h, w, *cfg,
                              derive_seed(master_seed_, static_cast<uint64_t>(epoch_),
                                          static_cast<uint64_t>(row), static_cast<uint64_t>(copy)));
            std::copy(img.begin(), img.end(),
                      batch.images->data.begin() + static_cast<size_t>(slot) * h * w * 3);
            std::copy_n(data_.label_row(row), l, batch.labels.begin() + static_cast<size_t>(slot) * l);
            batch.indices[static_cast<size_t>(slot)] = row;
        }
    }
    return batch;
}

// ---- on-disk format: magic "MLGD", version, N, L, H, W, pixels, labels ----

namespace {

constexpr char kMagic[4] = {'M', 'L', 'G', 'D'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& buf, uint16_t v) {
    for (int i = 0; i < 2; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    std::ifstream in;
    std::string path;
    explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw std::runtime_error("dataset: cannot open " + p);
    }
    void bytes(void* dst, size_t n, const char* what) {
        in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in.gcount()) != n)
            throw std::runtime_error("dataset: truncated file " + path + " while reading " + what);
    }
    uint32_t u32(const char* what) {
        uint8_t b[4];
        bytes(b, 4, what);
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    }
    uint16_t u16(const char* what) {
        uint8_t b[2];
        bytes(b, 2, what);
        return static_cast<uint16_t>(b[0] | (b[1] << 8));
    }
};

}  // namespace

void save_dataset(const GlyphDataset& data, const std::string& path) {
    std::string header;
    header.append(kMagic, 4);
    put_u32(header, kVersion);
    put_u32(header, static_cast<uint32_t>(data.count));
    put_u32(header, static_cast<uint32_t>(data.num_classes));
    put_u16(header, static_cast<uint16_t>(data.height));
    put_u16(header, static_cast<uint16_t>(data.width));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("dataset: cannot write " + path);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(data.pixels.data()),
              static_cast<std::streamsize>(data.pixels.size()));
    out.write(reinterpret_cast<const char*>(data.labels.data()),
              static_cast<std::streamsize>(data.labels.size()));
    if (!out) throw std::runtime_error("dataset: write failed for " + path);
}

GlyphDataset load_dataset(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("dataset: bad magic in " + path + ", not a MLGD file");
    uint32_t version = r.u32("version");
    if (version != kVersion)
        throw std::runtime_error("dataset: unsupported version " + std::to_string(version) + " in " + path);
    GlyphDataset ds;
    ds.count = static_cast<int>(r.u32("count"));
    ds.num_classes = static_cast<int>(r.u32("classes"));
    ds.height = r.u16("height");
    ds.width = r.u16("width");
    if (ds.count <= 0 || ds.num_classes <= 0 || ds.height <= 0 || ds.width <= 0)
        throw std::runtime_error("dataset: corrupt header in " + path);
    ds.pixels.resize(static_cast<size_t>(ds.count) * ds.height * ds.width * 3);
    ds.labels.resize(static_cast<size_t>(ds.count) * ds.num_classes);
    r.bytes(ds.pixels.data(), ds.pixels.size(), "pixels");
    r.bytes(ds.labels.data(), ds.labels.size(), "labels");
    return ds;
}

}  // namespace mulcon
