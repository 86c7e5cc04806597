#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <string>
#include <vector>

namespace hyperot {

// 18 disease categories, each carrying exactly one of four statuses.
inline constexpr std::size_t kCategoryCount = 18;
inline constexpr std::size_t kStatusCount = 4;
inline constexpr std::size_t kStatusBits = kCategoryCount * kStatusCount;  // 72

enum class Status : int { Blank = 0, Positive = 1, Negative = 2, Uncertain = 3 };

using Statuses = std::array<int, kCategoryCount>;

// 72-bit code, one-hot per 4-status category block. Bit 4k + s is set when
// category k has status s.
struct StatusVector {
    std::bitset<kStatusBits> bits;

    bool operator==(const StatusVector&) const = default;
};

struct LabelRecord {
    std::string id;
    Statuses statuses;
};

// Square integer matrix (Hamming ground truth), row-major.
struct IntMatrix {
    std::size_t n = 0;
    std::vector<int> values;

    int at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
    int& at(std::size_t i, std::size_t j) { return values[i * n + j]; }
};

StatusVector encode_status_vector(const Statuses& statuses);

// Inverse of the encoding: per-block index of the set bit.
Statuses decode_status_vector(const StatusVector& v);

int hamming_distance(const StatusVector& u, const StatusVector& v);

IntMatrix hamming_matrix(const std::vector<StatusVector>& batch);

}  // namespace hyperot
