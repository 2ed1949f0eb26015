// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace cloudmd {

/// Base of every persistence failure.
class StoreError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
/// Bad magic bytes or unparsable layout.
class FormatError : public StoreError {
public:
    using StoreError::StoreError;
};
class VersionError : public StoreError {
public:
    using StoreError::StoreError;
};
/// File ended before the declared content.
class TruncatedError : public StoreError {
public:
    using StoreError::StoreError;
};
/// Feature schema differs from the one expected.
class SchemaError : public StoreError {
public:
    using StoreError::StoreError;
};
/// Model file holds a different classifier kind than requested.
class KindMismatchError : public StoreError {
public:
    using StoreError::StoreError;
};

/// Appends little-endian scalars to a byte buffer.
class ByteWriter {
public:
    template <typename T>
    void put(T value) {
        static_assert(std::is_arithmetic_v<T>);
        if constexpr (sizeof(T) == 1) {
            buf_.push_back(static_cast<char>(value));
        } else {
            using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                         std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
            U bits;
            std::memcpy(&bits, &value, sizeof(T));
            for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
        }
    }
    void put_bytes(std::string_view bytes) { buf_.append(bytes); }
    void put_string(std::string_view s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }
    template <typename T>
    void put_vector(const std::vector<T>& v) {
        put<std::uint64_t>(v.size());
        for (const T& x : v) put<T>(x);
    }

    const std::string& bytes() const noexcept { return buf_; }
    std::string take() { return std::move(buf_); }

private:
    std::string buf_;
};

/// Reads what ByteWriter wrote; every overrun raises TruncatedError.
class ByteReader {
public:
    explicit ByteReader(std::string_view data) : data_(data) {}

    template <typename T>
    T get() {
        static_assert(std::is_arithmetic_v<T>);
        need(sizeof(T));
        T value;
        if constexpr (sizeof(T) == 1) {
            std::memcpy(&value, data_.data() + pos_, 1);
        } else {
            using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                         std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
            U bits = 0;
            for (std::size_t i = 0; i < sizeof(T); ++i)
                bits |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
            std::memcpy(&value, &bits, sizeof(T));
        }
        pos_ += sizeof(T);
        return value;
    }
    std::string_view get_bytes(std::size_t n) {
        need(n);
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::string get_string() {
        const auto n = get<std::uint32_t>();
        return std::string(get_bytes(n));
    }
    template <typename T>
    std::vector<T> get_vector() {
        const auto n = get<std::uint64_t>();
        if (n > remaining() / sizeof(T)) throw TruncatedError("vector length exceeds remaining bytes");
        std::vector<T> v(n);
        for (auto& x : v) x = get<T>();
        return v;
    }

    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    bool done() const noexcept { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (n > remaining()) throw TruncatedError("unexpected end of data");
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

}  // namespace cloudmd
