#include "mtbr/video_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mtbr/binary_io.hpp"
#include "mtbr/errors.hpp"

namespace mtbr {

namespace {

template <typename Item>
void write_frames(const std::string& path, const std::vector<Item>& items, auto values_of) {
    ByteWriter w;
    w.bytes("MTVF");
    w.u32(kVideoFormatVersion);
    w.u32(static_cast<std::uint32_t>(items.size()));
    const std::size_t h = items.empty() ? 0 : items.front().height;
    const std::size_t wd = items.empty() ? 0 : items.front().width;
    const std::size_t c = items.empty() ? 0 : items.front().channels;
    for (const auto& it : items) {
        if (it.height != h || it.width != wd || it.channels != c) {
            throw ValidationError("all frames of a video must share one shape");
        }
    }
    w.u32(static_cast<std::uint32_t>(h));
    w.u32(static_cast<std::uint32_t>(wd));
    w.u32(static_cast<std::uint32_t>(c));
    for (const auto& it : items) {
        for (double v : values_of(it)) w.f32(static_cast<float>(v));
    }
    w.save(path);
}

// Next whitespace-separated header token, skipping '#' comments.
std::string netpbm_token(std::istream& in) {
    std::string tok;
    while (in) {
        const int ch = in.get();
        if (ch == EOF) break;
        if (ch == '#') {
            std::string ignored;
            std::getline(in, ignored);
            if (!tok.empty()) break;
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

}  // namespace

std::vector<Frame> read_video(const std::string& path) {
    ByteReader r = ByteReader::from_file(path);
    r.expect_magic("MTVF");
    if (r.u32() != kVideoFormatVersion) r.fail("unsupported MTVF version");
    const std::uint32_t count = r.u32();
    const std::uint32_t h = r.u32();
    const std::uint32_t w = r.u32();
    const std::uint32_t c = r.u32();
    if (count > 0 && (h == 0 || w == 0 || c == 0)) r.fail("zero frame dimension");
    const std::uint64_t per_frame = std::uint64_t{h} * w * c;
    if (r.remaining() != per_frame * count * 4) {
        r.fail("payload holds " + std::to_string(r.remaining()) + " bytes, header declares " +
               std::to_string(per_frame * count * 4));
    }
    std::vector<Frame> frames;
    frames.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Frame f(h, w, c);
        for (auto& v : f.pixels) v = r.f32();
        frames.push_back(std::move(f));
    }
    return frames;
}

void write_video(const std::string& path, const std::vector<Frame>& frames) {
    write_frames(path, frames, [](const Frame& f) -> const std::vector<double>& { return f.pixels; });
}

void write_video(const std::string& path, const std::vector<DctFrame>& frames) {
    write_frames(path, frames, [](const DctFrame& f) -> const std::vector<double>& { return f.coefficients; });
}

Frame read_netpbm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path);
    const std::string magic = netpbm_token(in);
    std::size_t channels = 0;
    if (magic == "P5") channels = 1;
    else if (magic == "P6") channels = 3;
    else throw ValidationError(path + ": not a binary PGM/PPM file");
    std::size_t w = 0, h = 0, maxval = 0;
    try {
        w = std::stoul(netpbm_token(in));
        h = std::stoul(netpbm_token(in));
        maxval = std::stoul(netpbm_token(in));
    } catch (const std::exception&) {
        throw ValidationError(path + ": malformed netpbm header");
    }
    if (w == 0 || h == 0 || maxval == 0 || maxval > 255) {
        throw ValidationError(path + ": unsupported netpbm geometry or depth");
    }
    Frame f(h, w, channels);
    std::vector<unsigned char> raw(f.pixels.size());
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
        throw ValidationError(path + ": truncated pixel data");
    }
    for (std::size_t i = 0; i < raw.size(); ++i) f.pixels[i] = raw[i] / static_cast<double>(maxval);
    return f;
}

void write_netpbm(const std::string& path, const Frame& f) {
    if (f.channels != 1 && f.channels != 3) {
        throw ValidationError("netpbm output needs 1 or 3 channels, got " + std::to_string(f.channels));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open " + path + " for writing");
    out << (f.channels == 1 ? "P5" : "P6") << "\n" << f.width << " " << f.height << "\n255\n";
    for (double v : f.pixels) {
        const auto byte = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        out.put(static_cast<char>(byte));
    }
}

std::vector<Frame> read_frame_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ValidationError(dir + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto ext = entry.path().extension().string();
        if (entry.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Frame> frames;
    for (const auto& p : files) frames.push_back(read_netpbm(p.string()));
    return frames;
}

}  // namespace mtbr
