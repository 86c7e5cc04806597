#include "hyperot/supervision.hpp"

#include "hyperot/errors.hpp"

namespace hyperot {

StatusVector encode_status_vector(const Statuses& statuses) {
    StatusVector v;
    for (std::size_t k = 0; k < kCategoryCount; ++k) {
        const int s = statuses[k];
        if (s < 0 || s >= static_cast<int>(kStatusCount)) {
            throw ValidationError("status " + std::to_string(s) + " for category " +
                                  std::to_string(k) + " outside {0,1,2,3}");
        }
        v.bits.set(k * kStatusCount + static_cast<std::size_t>(s));
    }
    return v;
}

Statuses decode_status_vector(const StatusVector& v) {
    Statuses out{};
    for (std::size_t k = 0; k < kCategoryCount; ++k) {
        int found = -1;
        for (std::size_t s = 0; s < kStatusCount; ++s) {
            if (v.bits.test(k * kStatusCount + s)) {
                found = static_cast<int>(s);
                break;  // per-block argmax: first set bit
            }
        }
        if (found < 0) {
            throw ValidationError("status vector has empty block for category " +
                                  std::to_string(k));
        }
        out[k] = found;
    }
    return out;
}

int hamming_distance(const StatusVector& u, const StatusVector& v) {
    return static_cast<int>((u.bits ^ v.bits).count());
}

IntMatrix hamming_matrix(const std::vector<StatusVector>& batch) {
    if (batch.size() < 2) {
        throw ValidationError("hamming_matrix: batch of " + std::to_string(batch.size()) +
                              " records, need at least 2");
    }
    IntMatrix m;
    m.n = batch.size();
    m.values.assign(m.n * m.n, 0);
    for (std::size_t i = 0; i < m.n; ++i) {
        for (std::size_t j = i + 1; j < m.n; ++j) {
            const int d = hamming_distance(batch[i], batch[j]);
            m.at(i, j) = d;
            m.at(j, i) = d;
        }
    }
    return m;
}

}  // namespace hyperot
