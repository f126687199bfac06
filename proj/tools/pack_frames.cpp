// Packs a directory of PGM/PPM frames (sorted by file name) into one MTVF video.
#include <CLI11.hpp>

#include <iostream>

#include "mtbr/dct.hpp"
#include "mtbr/video_io.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Pack a directory of netpbm frames into an MTVF video", "pack_frames"};
    std::string input, output;
    std::size_t resize = 0;
    app.add_option("--input", input, "Directory of .pgm/.ppm frames")->required();
    app.add_option("--output", output, "Output MTVF video")->required();
    app.add_option("--resize", resize, "Resize frames to N×N");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;
    }
    try {
        auto frames = mtbr::read_frame_directory(input);
        if (resize > 0) {
            for (auto& f : frames) f = mtbr::resize_bilinear(f, resize, resize);
        }
        mtbr::write_video(output, frames);
        std::cout << "packed " << frames.size() << " frames into " << output << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
