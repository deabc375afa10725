#include "hyperwalker/io.hpp"

#include <array>
#include <fstream>

namespace hyperwalker {

namespace {
std::array<uint32_t, 256> make_crc_table() {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
        uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        t[i] = c;
    }
    return t;
}
}  // namespace

uint32_t crc32(const uint8_t* data, size_t len, uint32_t seed) {
    static const auto table = make_crc_table();
    uint32_t c = seed ^ 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

std::vector<uint8_t> ByteWriter::finish() {
    uint32_t c = crc32(buf_.data(), buf_.size());
    pod(c);
    return std::move(buf_);
}

ByteReader::ByteReader(std::vector<uint8_t> data) : buf_(std::move(data)) {
    if (buf_.size() < sizeof(uint32_t)) throw CorruptionError("stream too short for checksum");
    uint32_t stored;
    std::memcpy(&stored, buf_.data() + buf_.size() - sizeof(uint32_t), sizeof(uint32_t));
    buf_.resize(buf_.size() - sizeof(uint32_t));
    uint32_t actual = crc32(buf_.data(), buf_.size());
    if (stored != actual) throw CorruptionError("checksum mismatch");
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DomainError("cannot open for write: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DomainError("write failed: " + path);
}

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw DomainError("cannot open for read: " + path);
    auto size = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(size));
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!f) throw DomainError("read failed: " + path);
    return bytes;
}

}  // namespace hyperwalker
