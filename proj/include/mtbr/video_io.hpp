#pragma once

#include <string>
#include <vector>

#include "mtbr/dct.hpp"

namespace mtbr {

// MTVF raw video container: "MTVF", u32 version, u32 frame_count, u32 height,
// u32 width, u32 channels, then frame_count·h·w·c little-endian float32.
inline constexpr std::uint32_t kVideoFormatVersion = 1;

std::vector<Frame> read_video(const std::string& path);
void write_video(const std::string& path, const std::vector<Frame>& frames);
void write_video(const std::string& path, const std::vector<DctFrame>& frames);

// Binary netpbm (P5 grey / P6 RGB, maxval <= 255).
Frame read_netpbm(const std::string& path);
void write_netpbm(const std::string& path, const Frame& f);

// Packs every .pgm/.ppm file of a directory, in name order, into one frame list.
std::vector<Frame> read_frame_directory(const std::string& dir);

}  // namespace mtbr
