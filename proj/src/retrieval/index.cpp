#include "icar/retrieval/index.hpp"

#include "icar/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace icar::retrieval {

EmbeddingIndex EmbeddingIndex::build(Matrix embeddings, std::vector<Id> ids, std::vector<std::uint64_t> categories,
                                     std::vector<int> provenance) {
  const auto n = static_cast<std::size_t>(embeddings.rows());
  if (n == 0 || embeddings.cols() == 0) throw ContractError("build_index: no embeddings");
  if (ids.size() != n) {
    throw DimensionError("build_index: " + std::to_string(ids.size()) + " ids for " + std::to_string(n) + " rows");
  }
  if (categories.empty()) categories.assign(n, 0);
  if (provenance.empty()) provenance.assign(n, 0);
  if (categories.size() != n || provenance.size() != n) {
    throw DimensionError("build_index: categories/provenance length does not match " + std::to_string(n) + " rows");
  }
  std::unordered_set<Id> seen;
  for (Id id : ids)
    if (!seen.insert(id).second) throw ContractError("build_index: duplicate id " + std::to_string(id));
  for (Index i = 0; i < embeddings.rows(); ++i) {
    const double norm = embeddings.row(i).norm();
    if (!(std::abs(norm - 1.0) <= kNormTolerance)) {
      throw ContractError("build_index: row for id " + std::to_string(ids[i]) + " has norm " + std::to_string(norm));
    }
  }
  EmbeddingIndex idx;
  idx.matrix_ = std::move(embeddings);
  idx.ids_ = std::move(ids);
  idx.categories_ = std::move(categories);
  idx.provenance_ = std::move(provenance);
  return idx;
}

EmbeddingIndex merge(const EmbeddingIndex& a, const EmbeddingIndex& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("merge: dims " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
  }
  Matrix m(a.size() + b.size(), a.dim());
  m << a.matrix(), b.matrix();
  auto cat = [](auto x, const auto& y) {
    x.insert(x.end(), y.begin(), y.end());
    return x;
  };
  return EmbeddingIndex::build(std::move(m), cat(a.ids(), b.ids()), cat(a.categories(), b.categories()),
                               cat(a.provenance(), b.provenance()));
}

RetrievalResult search_topk(const EmbeddingIndex& index, const Vector& query, std::size_t k, Id query_id) {
  if (k == 0) throw ContractError("search_topk: k must be >= 1");
  if (query.size() != index.dim()) {
    throw DimensionError("search_topk: query dim " + std::to_string(query.size()) + " vs index dim " +
                         std::to_string(index.dim()));
  }
  const Matrix& m = index.matrix();
  const auto n = static_cast<std::size_t>(index.size());
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (Index j = 0; j < m.cols(); ++j) s += m(static_cast<Index>(i), j) * query[j];
    score[i] = s;
  }
  const auto& ids = index.ids();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t top = std::min(k, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return score[a] != score[b] ? score[a] > score[b] : ids[a] < ids[b];
                    });
  RetrievalResult r;
  r.query_id = query_id;
  for (std::size_t i = 0; i < top; ++i) {
    r.ids.push_back(ids[order[i]]);
    r.scores.push_back(score[order[i]]);
  }
  return r;
}

std::vector<RetrievalResult> search_batch(const EmbeddingIndex& index, const Matrix& queries,
                                          std::span<const Id> query_ids, std::size_t k, unsigned threads) {
  if (query_ids.size() != static_cast<std::size_t>(queries.rows())) {
    throw DimensionError("search_batch: query ids and query rows differ in count");
  }
  std::vector<RetrievalResult> out(query_ids.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t q = begin; q < end; ++q)
      out[q] = search_topk(index, queries.row(static_cast<Index>(q)).transpose(), k, query_ids[q]);
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, out.size()))));
  if (threads == 1) {
    work(0, out.size());
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (out.size() + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t b = t * chunk, e = std::min(out.size(), b + chunk);
    if (b < e) pool.emplace_back(work, b, e);
  }
  for (auto& th : pool) th.join();
  return out;
}

double recall_at_k(std::span<const RetrievalResult> results, const std::unordered_map<Id, Id>& ground_truth,
                   std::size_t k) {
  if (results.empty()) throw ContractError("recall_at_k: no queries");
  std::size_t hits = 0;
  for (const auto& r : results) {
    const auto it = ground_truth.find(r.query_id);
    if (it == ground_truth.end()) {
      throw ContractError("recall_at_k: query " + std::to_string(r.query_id) + " has no ground truth");
    }
    const std::size_t depth = std::min(k, r.ids.size());
    if (std::find(r.ids.begin(), r.ids.begin() + static_cast<std::ptrdiff_t>(depth), it->second) !=
        r.ids.begin() + static_cast<std::ptrdiff_t>(depth)) {
      ++hits;
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(results.size());
}

double map_at_k(std::span<const RetrievalResult> results,
                const std::unordered_map<Id, std::unordered_set<Id>>& relevance, std::size_t k) {
  if (results.empty()) throw ContractError("map_at_k: no queries");
  double total = 0.0;
  for (const auto& r : results) {
    const auto it = relevance.find(r.query_id);
    if (it == relevance.end() || it->second.empty()) {
      throw UndefinedMetricError("map_at_k: query " + std::to_string(r.query_id) + " has no relevant items");
    }
    const std::size_t depth = std::min(k, r.ids.size());
    double ap = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < depth; ++i) {
      if (it->second.count(r.ids[i])) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(i + 1);
      }
    }
    total += ap / static_cast<double>(std::min(k, it->second.size()));
  }
  return 100.0 * total / static_cast<double>(results.size());
}

double rsum_retention(std::span<const double> variant, std::span<const double> baseline) {
  if (variant.size() != baseline.size()) {
    throw DimensionError("rsum_retention: " + std::to_string(variant.size()) + " variant scores vs " +
                         std::to_string(baseline.size()) + " baseline scores");
  }
  const double b = std::accumulate(baseline.begin(), baseline.end(), 0.0);
  if (b <= 0.0) throw ContractError("rsum_retention: baseline sum must be positive");
  return 100.0 * std::accumulate(variant.begin(), variant.end(), 0.0) / b;
}

}  // namespace icar::retrieval
