#include "hyperot/retrieval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "hyperot/checkpoint.hpp"
#include "hyperot/errors.hpp"
#include "hyperot/io.hpp"

namespace hyperot {

std::string backend_name(Backend b) {
    switch (b) {
        case Backend::Hyperbolic: return "hyperbolic";
        case Backend::Euclidean: return "euclidean";
        case Backend::Cosine: return "cosine";
    }
    throw ValidationError("unknown backend value");
}

Backend backend_from_name(const std::string& name) {
    if (name == "hyperbolic") return Backend::Hyperbolic;
    if (name == "euclidean") return Backend::Euclidean;
    if (name == "cosine") return Backend::Cosine;
    throw ValidationError("unknown backend '" + name +
                          "' (expected hyperbolic, euclidean, or cosine)");
}

namespace {

Tensor row_norms_guarded(const Tensor& x, double eps) {
    return ops::emax(ops::sqrt(ops::reduce_sum(ops::square(x), 1)), eps);
}

}  // namespace

DistanceMatrix pairwise_distances(const Tensor& points, Backend backend,
                                  const BallConfig& config) {
    if (points.ndim() != 2 || points.rows() < 2) {
        throw ValidationError("pairwise_distances: need a [B x d] batch with B >= 2, got " +
                              shape_str(points.shape()));
    }
    const std::size_t b = points.rows();
    DistanceMatrix out;
    out.backend = backend;
    switch (backend) {
        case Backend::Hyperbolic: {
            // Row i repeated B times against the whole batch tiled B times
            // yields all ordered pairs in one geodesic call.
            Tensor lhs = ops::repeat_each_row(points, b);
            Tensor rhs = ops::repeat_rows(points, b);
            Tensor d = geodesic_distance(lhs, rhs, config);
            out.values = ops::reshape(d, Shape{b, b});
            break;
        }
        case Backend::Euclidean: {
            Tensor diff = ops::sub(ops::repeat_each_row(points, b), ops::repeat_rows(points, b));
            Tensor d = ops::sqrt(ops::reduce_sum(ops::square(diff), 1));
            out.values = ops::reshape(d, Shape{b, b});
            break;
        }
        case Backend::Cosine: {
            Tensor dots = ops::matmul(points, ops::transpose(points));
            Tensor inv_norms = ops::div(1.0, row_norms_guarded(points, 1e-12));
            Tensor cos = ops::mul_rowvec(ops::mul_colvec(dots, inv_norms), inv_norms);
            out.values = ops::sub(1.0, cos);
            break;
        }
    }
    return out;
}

RankTargets rank_targets(const IntMatrix& D) {
    const std::size_t b = D.n;
    if (b < 2) throw ValidationError("rank_targets: need at least 2 rows, got " + std::to_string(b));
    if (D.values.size() != b * b) throw ValidationError("rank_targets: matrix is not square");
    for (std::size_t i = 0; i < b; ++i) {
        if (D.at(i, i) != 0) throw ValidationError("rank_targets: nonzero diagonal at row " + std::to_string(i));
        for (std::size_t j = i + 1; j < b; ++j) {
            if (D.at(i, j) != D.at(j, i)) {
                throw ValidationError("rank_targets: matrix not symmetric at (" + std::to_string(i) +
                                      ", " + std::to_string(j) + ")");
            }
        }
    }
    RankTargets targets;
    targets.indices.resize(b);
    for (std::size_t i = 0; i < b; ++i) {
        std::size_t best = i == 0 ? 1 : 0;
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i) continue;
            if (D.at(i, j) < D.at(i, best)) best = j;
        }
        targets.indices[i] = static_cast<int>(best);
    }
    return targets;
}

Tensor rank_loss(const DistanceMatrix& distances, const RankTargets& targets, double tau) {
    if (!(tau > 0.0)) throw ValidationError("rank_loss: temperature must be positive");
    const std::size_t b = distances.values.rows();
    if (distances.values.cols() != b) {
        throw DimensionError("rank_loss: distance matrix must be square, got " +
                             shape_str(distances.values.shape()));
    }
    if (targets.indices.size() != b) {
        throw ValidationError("rank_loss: " + std::to_string(targets.indices.size()) +
                              " targets for batch of " + std::to_string(b));
    }
    for (std::size_t i = 0; i < b; ++i) {
        if (targets.indices[i] == static_cast<int>(i)) {
            throw ValidationError("rank_loss: target of row " + std::to_string(i) +
                                  " is the row itself");
        }
    }
    Tensor mask = Tensor::zeros(Shape{b, b});
    for (std::size_t i = 0; i < b; ++i) mask.mutable_values()[i * b + i] = 1.0;
    Tensor logits = ops::mul(distances.values, -1.0 / tau);
    return ops::cross_entropy_rows(logits, targets.indices, &mask);
}

std::size_t select_grp_training(const IntMatrix& D, std::size_t row) {
    if (row >= D.n) {
        throw IndexError("select_grp_training: row " + std::to_string(row) + " outside batch of " +
                         std::to_string(D.n));
    }
    return static_cast<std::size_t>(rank_targets(D).indices[row]);
}

namespace {

Tensor embed_records(const std::vector<IndexedCorpusEntry>& records, const HnnParams& model,
                     Backend backend) {
    const std::size_t n = records.size();
    const std::size_t m = model.weight.rows();
    std::vector<double> flat;
    flat.reserve(n * m);
    for (const auto& rec : records) {
        if (rec.logits.size() != m) {
            throw ValidationError("index_build: record " + rec.id + " has " +
                                  std::to_string(rec.logits.size()) + " logits, model expects " +
                                  std::to_string(m));
        }
        flat.insert(flat.end(), rec.logits.begin(), rec.logits.end());
    }
    Tensor logits(Shape{n, m}, std::move(flat));
    if (backend == Backend::Hyperbolic) return hnn_embed(logits, model).coords;
    return hnn_affine(logits, model);
}

void backend_distances(const RetrievalIndex& index, const Tensor& query_embedded,
                       std::vector<double>& out) {
    const std::size_t n = index.size();
    const std::size_t d = index.embeddings.cols();
    const auto& emb = index.embeddings.values();
    const auto& q = query_embedded.values();
    out.resize(n);
    switch (index.backend) {
        case Backend::Hyperbolic: {
            Tensor tiled = ops::repeat_rows(query_embedded, n);
            Tensor dists = geodesic_distance(tiled, index.embeddings, index.ball);
            std::copy(dists.values().begin(), dists.values().end(), out.begin());
            break;
        }
        case Backend::Euclidean: {
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = q[j] - emb[i * d + j];
                    acc += diff * diff;
                }
                out[i] = std::sqrt(acc);
            }
            break;
        }
        case Backend::Cosine: {
            double qn = 0.0;
            for (std::size_t j = 0; j < d; ++j) qn += q[j] * q[j];
            qn = std::max(std::sqrt(qn), 1e-12);
            for (std::size_t i = 0; i < n; ++i) {
                double dot = 0.0, en = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    dot += q[j] * emb[i * d + j];
                    en += emb[i * d + j] * emb[i * d + j];
                }
                en = std::max(std::sqrt(en), 1e-12);
                out[i] = 1.0 - dot / (qn * en);
            }
            break;
        }
    }
}

std::string model_checksum(const HnnParams& model) {
    Checkpoint ckpt;
    ckpt.arrays.emplace("hnn.weight", Tensor(model.weight.shape(), model.weight.values()));
    ckpt.arrays.emplace("hnn.bias", Tensor(model.bias.shape(), model.bias.values()));
    ckpt.arrays.emplace("hnn.curvature", Tensor::scalar(model.config.curvature));
    return ckpt.checksum();
}

}  // namespace

RetrievalIndex index_build(const std::vector<IndexedCorpusEntry>& records, const HnnParams& model,
                           Backend backend) {
    if (records.empty()) throw ValidationError("index_build: empty corpus");
    RetrievalIndex index;
    index.embeddings = embed_records(records, model, backend);
    index.ids.reserve(records.size());
    for (const auto& rec : records) index.ids.push_back(rec.id);
    index.backend = backend;
    index.ball = model.config;
    index.model = model;
    index.model_checksum = model_checksum(model);
    index.built_unix_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::system_clock::now().time_since_epoch())
                              .count();
    return index;
}

std::vector<std::pair<std::string, double>> index_query(const RetrievalIndex& index,
                                                        const std::vector<double>& query_logits,
                                                        std::size_t k) {
    if (k == 0 || k > index.size()) {
        throw ValidationError("index_query: k = " + std::to_string(k) + " outside [1, " +
                              std::to_string(index.size()) + "]");
    }
    Tensor query(Shape{1, query_logits.size()}, query_logits);
    Tensor embedded = index.backend == Backend::Hyperbolic
                          ? hnn_embed(query, index.model).coords
                          : hnn_affine(query, index.model);
    std::vector<double> dists;
    backend_distances(index, embedded, dists);

    std::vector<std::size_t> order(index.size());
    std::iota(order.begin(), order.end(), 0);
    // stable sort keeps insertion order on distance ties
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dists[a] < dists[b]; });
    std::vector<std::pair<std::string, double>> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.emplace_back(index.ids[order[i]], dists[order[i]]);
    return out;
}

void index_save(const RetrievalIndex& index, const std::string& path) {
    nlohmann::json header;
    header["ids"] = index.ids;
    header["backend"] = backend_name(index.backend);
    header["curvature"] = index.ball.curvature;
    header["model_checksum"] = index.model_checksum;
    header["built_unix_ms"] = index.built_unix_ms;

    Checkpoint payload;
    payload.arrays.emplace("embeddings",
                           Tensor(index.embeddings.shape(), index.embeddings.values()));

    nlohmann::json doc;
    doc["header"] = std::move(header);
    doc["payload"] = nlohmann::json::parse(payload.to_json());
    atomic_write_file(path, doc.dump());
}

RetrievalIndex index_load(const std::string& path, const HnnParams& model) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("index file: invalid JSON: ") + e.what());
    }
    const auto& header = doc.at("header");
    RetrievalIndex index;
    index.ids = header.at("ids").get<std::vector<std::string>>();
    index.backend = backend_from_name(header.at("backend").get<std::string>());
    index.ball = BallConfig::create(header.at("curvature").get<double>());
    index.model_checksum = header.at("model_checksum").get<std::string>();
    index.built_unix_ms = header.value("built_unix_ms", std::int64_t{0});
    Checkpoint payload = Checkpoint::from_json(doc.at("payload").dump());
    index.embeddings = payload.get("embeddings");
    index.model = model;
    const std::string supplied = model_checksum(model);
    if (supplied != index.model_checksum) {
        throw ValidationError("index_load: model checksum " + supplied +
                              " does not match index header " + index.model_checksum);
    }
    if (index.embeddings.rows() != index.ids.size()) {
        throw ValidationError("index_load: embedding count does not match id count");
    }
    return index;
}

}  // namespace hyperot
