#include "mtbr/binary_io.hpp"

#include <fstream>
#include <iterator>

namespace mtbr {

void write_file_bytes(const std::string& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open " + path + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ValidationError("failed writing " + path);
}

std::vector<char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path, 0);
    return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

ByteReader ByteReader::from_file(const std::string& path) { return ByteReader(read_file_bytes(path)); }

void ByteReader::need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
        throw FormatError("unexpected end of file: need " + std::to_string(n) + " more bytes, have " +
                              std::to_string(data_.size() - pos_),
                          pos_);
    }
}

void ByteReader::expect_magic(std::string_view magic) {
    need(magic.size());
    if (std::string_view(data_.data() + pos_, magic.size()) != magic) {
        fail("bad magic, expected \"" + std::string(magic) + "\"");
    }
    pos_ += magic.size();
}

std::string ByteReader::str(std::size_t n) {
    need(n);
    std::string s(data_.data() + pos_, n);
    pos_ += n;
    return s;
}

void ByteReader::expect_end() const {
    if (pos_ != data_.size()) {
        fail(std::to_string(data_.size() - pos_) + " trailing bytes after payload");
    }
}

}  // namespace mtbr
