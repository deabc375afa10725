#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "hyperwalker/common.hpp"

namespace hyperwalker {

uint32_t crc32(const uint8_t* data, size_t len, uint32_t seed = 0);

// Little-endian binary writer accumulating into a byte buffer.
class ByteWriter {
public:
    template <typename T>
    void pod(const T& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const uint8_t*>(&v);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }
    void str(const std::string& s) {
        pod(static_cast<uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void floats(const std::vector<float>& v) {
        pod(static_cast<uint32_t>(v.size()));
        const auto* p = reinterpret_cast<const uint8_t*>(v.data());
        buf_.insert(buf_.end(), p, p + v.size() * sizeof(float));
    }
    void u32s(const std::vector<uint32_t>& v) {
        pod(static_cast<uint32_t>(v.size()));
        const auto* p = reinterpret_cast<const uint8_t*>(v.data());
        buf_.insert(buf_.end(), p, p + v.size() * sizeof(uint32_t));
    }
    // Appends crc32 of everything written so far and returns the buffer.
    std::vector<uint8_t> finish();
    const std::vector<uint8_t>& bytes() const { return buf_; }

private:
    std::vector<uint8_t> buf_;
};

class ByteReader {
public:
    // Verifies and strips the trailing checksum. Throws CorruptionError.
    explicit ByteReader(std::vector<uint8_t> data);

    template <typename T>
    T pod() {
        static_assert(std::is_trivially_copyable_v<T>);
        need(sizeof(T));
        T v;
        std::memcpy(&v, buf_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string str() {
        uint32_t n = pod<uint32_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::vector<float> floats() {
        uint32_t n = pod<uint32_t>();
        need(static_cast<size_t>(n) * sizeof(float));
        std::vector<float> v(n);
        std::memcpy(v.data(), buf_.data() + pos_, n * sizeof(float));
        pos_ += n * sizeof(float);
        return v;
    }
    std::vector<uint32_t> u32s() {
        uint32_t n = pod<uint32_t>();
        need(static_cast<size_t>(n) * sizeof(uint32_t));
        std::vector<uint32_t> v(n);
        std::memcpy(v.data(), buf_.data() + pos_, n * sizeof(uint32_t));
        pos_ += n * sizeof(uint32_t);
        return v;
    }
    bool done() const { return pos_ == buf_.size(); }

private:
    void need(size_t n) const {
        if (pos_ + n > buf_.size()) throw CorruptionError("truncated stream");
    }
    std::vector<uint8_t> buf_;
    size_t pos_ = 0;
};

void write_file(const std::string& path, const std::vector<uint8_t>& bytes);
std::vector<uint8_t> read_file(const std::string& path);

}  // namespace hyperwalker
