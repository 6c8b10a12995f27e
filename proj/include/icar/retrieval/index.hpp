#pragma once

#include "icar/numerics/tensor.hpp"

#include <cstdint>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace icar::retrieval {

using Id = std::uint64_t;

// Immutable set of unit-norm embeddings. Rows may come from different encoder
// depths; `provenance` records which exit produced each row.
class EmbeddingIndex {
 public:
  static constexpr double kNormTolerance = 1e-6;

  // Throws ContractError on an empty input, a duplicate id or a row whose norm
  // is off by more than kNormTolerance; DimensionError on inconsistent sizes.
  // Empty categories / provenance default to 0 for every row.
  static EmbeddingIndex build(Matrix embeddings, std::vector<Id> ids, std::vector<std::uint64_t> categories = {},
                              std::vector<int> provenance = {});

  Index size() const { return matrix_.rows(); }
  Index dim() const { return matrix_.cols(); }
  const Matrix& matrix() const { return matrix_; }
  const std::vector<Id>& ids() const { return ids_; }
  const std::vector<std::uint64_t>& categories() const { return categories_; }
  const std::vector<int>& provenance() const { return provenance_; }

 private:
  EmbeddingIndex() = default;

  Matrix matrix_;
  std::vector<Id> ids_;
  std::vector<std::uint64_t> categories_;
  std::vector<int> provenance_;
};

// Rows of a followed by rows of b.
EmbeddingIndex merge(const EmbeddingIndex& a, const EmbeddingIndex& b);

struct RetrievalResult {
  Id query_id = 0;
  std::vector<Id> ids;  // descending score, ties by ascending id
  std::vector<double> scores;
};

// Exact top-min(k, N) by cosine. Scores are accumulated left to right over the
// embedding dimension so results are reproducible bit for bit.
RetrievalResult search_topk(const EmbeddingIndex& index, const Vector& query, std::size_t k, Id query_id = 0);

// One search per query row, split across `threads` workers; output order
// follows the query order regardless of scheduling.
std::vector<RetrievalResult> search_batch(const EmbeddingIndex& index, const Matrix& queries,
                                          std::span<const Id> query_ids, std::size_t k, unsigned threads = 1);

// 100 x fraction of queries whose ground-truth id is within the top k.
double recall_at_k(std::span<const RetrievalResult> results, const std::unordered_map<Id, Id>& ground_truth,
                   std::size_t k);

// Mean over queries of (1 / min(k, |rel|)) sum_{i <= k, hit} precision@i, x 100.
double map_at_k(std::span<const RetrievalResult> results,
                const std::unordered_map<Id, std::unordered_set<Id>>& relevance, std::size_t k);

// 100 x sum(variant) / sum(baseline).
double rsum_retention(std::span<const double> variant, std::span<const double> baseline);

}  // namespace icar::retrieval
