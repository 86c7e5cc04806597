#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hyperot/hyperbolic.hpp"
#include "hyperot/supervision.hpp"
#include "hyperot/tensor.hpp"

namespace hyperot {

enum class Backend { Hyperbolic, Euclidean, Cosine };

std::string backend_name(Backend b);
Backend backend_from_name(const std::string& name);

struct DistanceMatrix {
    Tensor values;  // [B x B]
    Backend backend = Backend::Hyperbolic;
    bool diagonal_masked = false;
};

// Per-row nearest-neighbor index under the ground-truth matrix; never the row
// itself.
struct RankTargets {
    std::vector<int> indices;
};

// Pairwise distances over a batch of embedded rows. Hyperbolic rows must lie
// inside the ball; euclidean/cosine accept any finite features.
DistanceMatrix pairwise_distances(const Tensor& points, Backend backend,
                                  const BallConfig& config);

// argmin over j != i per row, ties toward the smallest index. D must be
// square, symmetric, zero-diagonal, with at least two rows.
RankTargets rank_targets(const IntMatrix& D);

// Cross entropy of -values/tau against the target indices, diagonal masked.
Tensor rank_loss(const DistanceMatrix& distances, const RankTargets& targets, double tau);

// Training-time reference selection: the batch index whose ground-truth
// distance to `row` is smallest.
std::size_t select_grp_training(const IntMatrix& D, std::size_t row);

// Immutable embedding snapshot for exact (linear scan) nearest-neighbor
// queries. Hyperbolic indexes hold ball points; euclidean/cosine hold the
// pre-ball affine features.
struct RetrievalIndex {
    Tensor embeddings;  // [N x d_h]
    std::vector<std::string> ids;
    Backend backend = Backend::Hyperbolic;
    BallConfig ball;
    HnnParams model;  // used to embed queries
    std::string model_checksum;
    std::int64_t built_unix_ms = 0;

    std::size_t size() const { return ids.size(); }
};

struct IndexedCorpusEntry {
    std::string id;
    std::vector<double> logits;
};

RetrievalIndex index_build(const std::vector<IndexedCorpusEntry>& records, const HnnParams& model,
                           Backend backend);

// Exact k-nearest by the index backend distance, ascending; ties broken by
// insertion order.
std::vector<std::pair<std::string, double>> index_query(const RetrievalIndex& index,
                                                        const std::vector<double>& query_logits,
                                                        std::size_t k);

// JSON header (ids, backend, config, model checksum) + checkpoint payload
// holding the embedding matrix.
void index_save(const RetrievalIndex& index, const std::string& path);
RetrievalIndex index_load(const std::string& path, const HnnParams& model);

}  // namespace hyperot
