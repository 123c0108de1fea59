#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mulcon/tensor.hpp"

namespace mulcon {

// Synthetic multi-label benchmark: colored glyphs on a noisy gray background.
// Every image carries 1..4 distinct glyph classes and its label vector is
// exactly the set of classes drawn.
struct GlyphDatasetConfig {
    int num_classes = 8;  // disk, square, triangle, cross, ring, bar-h, bar-v, diamond
    int image_size = 64;
    int min_objects = 1;
    int max_objects = 4;
    double min_scale = 8.0;
    double max_scale = 20.0;
    double brightness_jitter = 0.35;  // glyph value scaled by [1-jitter, 1]
    double noise_sigma = 0.06;        // background Gaussian noise
    int train_count = 2000;
    int test_count = 500;
    uint64_t seed = 7;
    void validate() const;
};

struct AugmentConfig {
    double flip_prob = 0.5;
    int max_translate = 2;      // pixels, zero-padded
    double noise_sigma = 0.02;  // clamped back to [0,1]
};

// flip-only variant used by the BCE pretraining phase
AugmentConfig light_augment(const AugmentConfig& base);

struct GlyphSpec {
    int cls;
    double cx, cy;  // center, pixels
    double size;    // full extent, pixels
    double brightness;
};

struct GlyphDataset {
    int count = 0;
    int num_classes = 0;
    int height = 0;
    int width = 0;
    std::vector<uint8_t> pixels;  // count*H*W*3, row-major HWC
    std::vector<uint8_t> labels;  // count*L multi-hot
    // generation-side record, not serialized
    std::vector<std::vector<GlyphSpec>> glyphs;

    const uint8_t* image(int i) const { return pixels.data() + static_cast<size_t>(i) * height * width * 3; }
    const uint8_t* label_row(int i) const { return labels.data() + static_cast<size_t>(i) * num_classes; }
    std::vector<double> image_as_double(int i) const;  // HWC in [0,1]
};

enum class Split { Train, Test };

GlyphDataset gen_dataset(const GlyphDatasetConfig& cfg, Split split);

std::vector<uint8_t> labels_from_glyphs(const std::vector<GlyphSpec>& specs, int num_classes);

// ---- augmentation ----

void flip_horizontal(std::vector<double>& img, int h, int w);

// flip / translate / noise per the config; labels pass through untouched
std::vector<double> augment(const std::vector<double>& img, int h, int w,
                            const AugmentConfig& cfg, uint64_t seed);

// ---- batching ----

struct LabeledImageBatch {
    TensorPtr images;             // [N,H,W,3] in [0,1], no grad
    std::vector<uint8_t> labels;  // N*L
    std::vector<int> indices;     // source rows, one per emitted image
    int n = 0;
    int num_labels = 0;
};

enum class AugmentMode {
    None,  // raw images (evaluation)
    Light, // one flip-only copy per sample
    Full,  // one fully augmented copy per sample
    Pair,  // light copy + independent full copy; batch size doubles
};

// Deterministic epoch batching: shuffle seed and per-sample augmentation
// seeds derive from (master seed, epoch, sample index, copy index). The
// ragged tail is dropped.
class BatchStream {
public:
    BatchStream(const GlyphDataset& data, int batch_size, uint64_t master_seed, int epoch,
                AugmentMode mode, const AugmentConfig& aug);
    size_t size() const { return order_.size() / static_cast<size_t>(batch_size_); }
    LabeledImageBatch get(size_t b) const;

private:
    const GlyphDataset& data_;
    int batch_size_;
    uint64_t master_seed_;
    int epoch_;
    AugmentMode mode_;
    AugmentConfig aug_;
    std::vector<int> order_;
};

// ---- on-disk format ----

void save_dataset(const GlyphDataset& data, const std::string& path);
GlyphDataset load_dataset(const std::string& path);

}  // namespace mulcon
