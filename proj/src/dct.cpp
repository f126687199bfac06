#include "mtbr/dct.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "mtbr/errors.hpp"

namespace mtbr {

namespace {

// Row k holds s(k)·cos(π(2i+1)k / 2n) for i in [0, n).
const std::vector<double>& dct_basis(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, std::unique_ptr<std::vector<double>>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[n];
    if (!slot) {
        auto basis = std::make_unique<std::vector<double>>(n * n);
        const double dn = static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double s = k == 0 ? std::sqrt(1.0 / dn) : std::sqrt(2.0 / dn);
            for (std::size_t i = 0; i < n; ++i) {
                (*basis)[k * n + i] =
                    s * std::cos(std::numbers::pi * static_cast<double>((2 * i + 1) * k) / (2.0 * dn));
            }
        }
        slot = std::move(basis);
    }
    return *slot;
}

void forward_1d(const std::vector<double>& basis, const double* in, std::size_t stride, double* out,
                std::size_t out_stride, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
        const double* row = basis.data() + k * n;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += row[i] * in[i * stride];
        out[k * out_stride] = acc;
    }
}

void inverse_1d(const std::vector<double>& basis, const double* in, std::size_t stride, double* out,
                std::size_t out_stride, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += basis[k * n + i] * in[k * stride];
        out[i * out_stride] = acc;
    }
}

using Transform1d = void (*)(const std::vector<double>&, const double*, std::size_t, double*, std::size_t,
                             std::size_t);

// Applies a 1-D transform along rows then columns of each channel plane.
std::vector<double> separable(const std::vector<double>& src, std::size_t h, std::size_t w, std::size_t c,
                              Transform1d op) {
    const auto& row_basis = dct_basis(w);
    const auto& col_basis = dct_basis(h);
    std::vector<double> tmp(src.size()), out(src.size());
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < h; ++y) {
            op(row_basis, src.data() + y * w * c + ch, c, tmp.data() + y * w * c + ch, c, w);
        }
        for (std::size_t x = 0; x < w; ++x) {
            op(col_basis, tmp.data() + x * c + ch, w * c, out.data() + x * c + ch, w * c, h);
        }
    }
    return out;
}

void check_layout(std::size_t h, std::size_t w, std::size_t c, std::size_t count) {
    if (h == 0 || w == 0 || c == 0) {
        throw DimensionError("frame dimensions must be positive");
    }
    if (count != h * w * c) {
        throw DimensionError("frame holds " + std::to_string(count) + " values, expected " +
                             std::to_string(h * w * c));
    }
}

}  // namespace

void validate_frame(const Frame& f) {
    if (f.height == 0 || f.width == 0 || f.channels == 0 ||
        f.pixels.size() != f.height * f.width * f.channels) {
        throw ValidationError("frame layout is inconsistent");
    }
    for (double v : f.pixels) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("pixel value outside [0, 1]");
    }
}

std::vector<double> dct1d(std::span<const double> x) {
    if (x.empty()) throw DimensionError("dct1d: empty input");
    std::vector<double> out(x.size());
    forward_1d(dct_basis(x.size()), x.data(), 1, out.data(), 1, x.size());
    return out;
}

std::vector<double> idct1d(std::span<const double> coeffs) {
    if (coeffs.empty()) throw DimensionError("idct1d: empty input");
    std::vector<double> out(coeffs.size());
    inverse_1d(dct_basis(coeffs.size()), coeffs.data(), 1, out.data(), 1, coeffs.size());
    return out;
}

DctFrame dct2d(const Frame& f) {
    check_layout(f.height, f.width, f.channels, f.pixels.size());
    DctFrame d;
    d.height = f.height;
    d.width = f.width;
    d.channels = f.channels;
    d.coefficients = separable(f.pixels, f.height, f.width, f.channels, forward_1d);
    return d;
}

Frame idct2d(const DctFrame& d) {
    check_layout(d.height, d.width, d.channels, d.coefficients.size());
    Frame f;
    f.height = d.height;
    f.width = d.width;
    f.channels = d.channels;
    f.pixels = separable(d.coefficients, d.height, d.width, d.channels, inverse_1d);
    return f;
}

std::vector<DctFrame> video_dct(const VideoSnippet& v) {
    std::vector<DctFrame> out;
    out.reserve(v.frames.size());
    for (const auto& f : v.frames) out.push_back(dct2d(f));
    return out;
}

Frame dct_visualize(const DctFrame& d) {
    check_layout(d.height, d.width, d.channels, d.coefficients.size());
    Frame f(d.height, d.width, d.channels);
    const std::size_t plane = d.height * d.width;
    for (std::size_t ch = 0; ch < d.channels; ++ch) {
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t p = 0; p < plane; ++p) {
            const double m = std::log1p(std::abs(d.coefficients[p * d.channels + ch]));
            f.pixels[p * d.channels + ch] = m;
            lo = std::min(lo, m);
            hi = std::max(hi, m);
        }
        const double span = hi - lo;
        for (std::size_t p = 0; p < plane; ++p) {
            double& v = f.pixels[p * d.channels + ch];
            v = span > 0.0 ? (v - lo) / span : 0.0;
        }
    }
    return f;
}

VideoSnippet take_snippet(std::vector<Frame> frames, std::size_t target_len) {
    if (target_len == 0) throw ContractError("take_snippet: target length must be at least 1");
    if (frames.size() < target_len) throw InsufficientFrames(frames.size(), target_len);
    for (const auto& f : frames) {
        if (f.height != frames.front().height || f.width != frames.front().width ||
            f.channels != frames.front().channels) {
            throw ValidationError("snippet frames do not share one shape");
        }
    }
    const std::size_t start = (frames.size() - target_len) / 2;
    VideoSnippet s;
    s.frames.assign(std::make_move_iterator(frames.begin() + static_cast<std::ptrdiff_t>(start)),
                    std::make_move_iterator(frames.begin() + static_cast<std::ptrdiff_t>(start + target_len)));
    return s;
}

Frame resize_bilinear(const Frame& f, std::size_t h, std::size_t w) {
    check_layout(f.height, f.width, f.channels, f.pixels.size());
    if (h == 0 || w == 0) throw DimensionError("resize_bilinear: target size must be positive");
    Frame out(h, w, f.channels);
    const double sy = static_cast<double>(f.height) / static_cast<double>(h);
    const double sx = static_cast<double>(f.width) / static_cast<double>(w);
    auto source = [](double pos, std::size_t n, std::size_t& i0, std::size_t& i1, double& frac) {
        pos = std::clamp(pos, 0.0, static_cast<double>(n - 1));
        i0 = static_cast<std::size_t>(std::floor(pos));
        i1 = std::min(i0 + 1, n - 1);
        frac = pos - static_cast<double>(i0);
    };
    for (std::size_t y = 0; y < h; ++y) {
        std::size_t y0, y1;
        double fy;
        source((static_cast<double>(y) + 0.5) * sy - 0.5, f.height, y0, y1, fy);
        for (std::size_t x = 0; x < w; ++x) {
            std::size_t x0, x1;
            double fx;
            source((static_cast<double>(x) + 0.5) * sx - 0.5, f.width, x0, x1, fx);
            for (std::size_t c = 0; c < f.channels; ++c) {
                const double top = (1.0 - fx) * f.at(y0, x0, c) + fx * f.at(y0, x1, c);
                const double bottom = (1.0 - fx) * f.at(y1, x0, c) + fx * f.at(y1, x1, c);
                out.at(y, x, c) = (1.0 - fy) * top + fy * bottom;
            }
        }
    }
    return out;
}

double frame_energy(std::span<const double> values) {
    double e = 0.0;
    for (double v : values) e += v * v;
    return e;
}

}  // namespace mtbr
