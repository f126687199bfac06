#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtbr {

// One video frame, row-major, channel-last. Pixel values live in [0, 1].
struct Frame {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<double> pixels;

    Frame() = default;
    Frame(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
        : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

    double& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
    double at(std::size_t y, std::size_t x, std::size_t c) const {
        return pixels[(y * width + x) * channels + c];
    }
};

// Frequency-domain image with the same layout as its source frame.
struct DctFrame {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<double> coefficients;

    double& at(std::size_t v, std::size_t u, std::size_t c) {
        return coefficients[(v * width + u) * channels + c];
    }
    double at(std::size_t v, std::size_t u, std::size_t c) const {
        return coefficients[(v * width + u) * channels + c];
    }
};

struct VideoSnippet {
    std::vector<Frame> frames;
};

inline constexpr std::size_t kSnippetLength = 64;
inline constexpr std::size_t kFrameSize = 224;

class InsufficientFrames : public std::runtime_error {
public:
    InsufficientFrames(std::size_t available, std::size_t required)
        : std::runtime_error("video has " + std::to_string(available) + " frames, need at least " +
                             std::to_string(required)),
          available_(available), required_(required) {}

    std::size_t available() const noexcept { return available_; }
    std::size_t required() const noexcept { return required_; }

private:
    std::size_t available_;
    std::size_t required_;
};

// Throws ValidationError on an inconsistent layout or pixels outside [0, 1].
void validate_frame(const Frame& f);

// Orthonormal DCT-II and its inverse (DCT-III).
std::vector<double> dct1d(std::span<const double> x);
std::vector<double> idct1d(std::span<const double> coeffs);

// Separable per-channel transform over the full frame.
DctFrame dct2d(const Frame& f);
Frame idct2d(const DctFrame& d);

std::vector<DctFrame> video_dct(const VideoSnippet& v);

// ln(1 + |coef|), min-max scaled into [0, 1] per channel.
Frame dct_visualize(const DctFrame& d);

// Centered contiguous window of target_len frames.
VideoSnippet take_snippet(std::vector<Frame> frames, std::size_t target_len = kSnippetLength);

// Bilinear resampling with pixel centers at half-integers, edges clamped.
Frame resize_bilinear(const Frame& f, std::size_t h, std::size_t w);

double frame_energy(std::span<const double> values);

}  // namespace mtbr
