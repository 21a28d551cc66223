#include "w2vt/evaluator.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>

#include <Eigen/Core>
#include <boost/math/distributions/students_t.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace w2vt {

IndexMode parse_index_mode(std::string_view name) {
  if (name == "exact") return IndexMode::kExact;
  if (name == "approx" || name == "approximate") return IndexMode::kApproximate;
  throw ValidationError("unknown index mode '" + std::string(name) + "' (expected exact or approx)");
}

std::string_view index_mode_name(IndexMode m) { return m == IndexMode::kExact ? "exact" : "approx"; }

namespace {

struct Scored {
  double score;
  std::uint32_t id;
};

// Better = higher score, then lower id.
inline bool better(const Scored& a, const Scored& b) {
  return a.score > b.score || (a.score == b.score && a.id < b.id);
}

}  // namespace

CosineIndex::CosineIndex(const EmbeddingModel& model, IndexMode mode, const ApproxConfig& cfg)
    : mode_(mode), n_(model.rows()), dim_(model.dim()), ef_search_(cfg.ef_search) {
  const auto d = static_cast<std::size_t>(dim_);
  unit_.resize(n_ * d);
  for (std::size_t i = 0; i < n_; ++i) {
    auto r = model.input_row(static_cast<TokenId>(i));
    double s = 0;
    for (float x : r) s += static_cast<double>(x) * x;
    const double inv = s > 0 ? 1.0 / std::sqrt(s) : 0.0;
    for (std::size_t k = 0; k < d; ++k) unit_[i * d + k] = static_cast<float>(r[k] * inv);
  }
  if (mode_ == IndexMode::kApproximate && n_ > 1) build_graph(cfg);
}

double CosineIndex::score(std::size_t a, std::size_t b) const {
  const float* x = row(a);
  const float* y = row(b);
  double s = 0;
  for (int k = 0; k < dim_; ++k) s += static_cast<double>(x[k]) * y[k];
  return s;
}

double CosineIndex::cosine(TokenId a, TokenId b) const {
  return score(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
}

std::vector<TokenId> CosineIndex::top_k(TokenId query, std::size_t k) const {
  if (query < 0 || static_cast<std::size_t>(query) >= n_) {
    throw ValidationError("query id " + std::to_string(query) + " has no vector");
  }
  if (mode_ == IndexMode::kApproximate && n_ > 1) return graph_top_k(query, k);
  return exact_top_k(query, k);
}

std::vector<TokenId> CosineIndex::exact_top_k(TokenId query, std::size_t k) const {
  const auto q = static_cast<std::size_t>(query);
  const std::size_t kk = std::min(k, n_ > 0 ? n_ - 1 : 0);
  std::vector<Scored> all;
  all.reserve(n_);
  for (std::size_t r = 0; r < n_; ++r) {
    if (r != q) all.push_back({score(q, r), static_cast<std::uint32_t>(r)});
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(kk), all.end(), better);
  std::vector<TokenId> ids(kk);
  for (std::size_t i = 0; i < kk; ++i) ids[i] = static_cast<TokenId>(all[i].id);
  return ids;
}

std::vector<std::vector<TokenId>> CosineIndex::exact_top_k_batch(std::span<const TokenId> queries,
                                                                 std::size_t k, int workers) const {
  using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const Matrix> all(unit_.data(), static_cast<Eigen::Index>(n_), dim_);
  const std::size_t kk = std::min(k, n_ > 0 ? n_ - 1 : 0);
  // Float and double scores of unit vectors differ by at most e ~ d * 2^-24; any
  // member of the true top k has a float score within 2e of the float k-th best.
  const float tol = 4.0f * static_cast<float>(dim_ + 4) * 0x1p-24f;
  constexpr std::size_t kBlock = 64;

  std::vector<std::vector<TokenId>> out(queries.size());
  const auto blocks = static_cast<std::int64_t>((queries.size() + kBlock - 1) / kBlock);
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, workers))
  for (std::int64_t b = 0; b < blocks; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
    const std::size_t hi = std::min(queries.size(), lo + kBlock);
    Matrix q(static_cast<Eigen::Index>(hi - lo), dim_);
    for (std::size_t i = lo; i < hi; ++i) {
      q.row(static_cast<Eigen::Index>(i - lo)) = all.row(queries[i]);
    }
    const Matrix s = q * all.transpose();
    std::vector<float> scratch;
    std::vector<Scored> cand;
    for (std::size_t i = lo; i < hi; ++i) {
      const auto qi = static_cast<std::size_t>(queries[i]);
      const float* row_scores = s.row(static_cast<Eigen::Index>(i - lo)).data();
      if (kk == 0) continue;
      scratch.assign(row_scores, row_scores + n_);
      scratch[qi] = -std::numeric_limits<float>::infinity();
      std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(kk - 1), scratch.end(),
                       std::greater<>());
      const float cut = scratch[kk - 1] - tol;
      cand.clear();
      for (std::size_t r = 0; r < n_; ++r) {
        if (r != qi && row_scores[r] >= cut) cand.push_back({score(qi, r), static_cast<std::uint32_t>(r)});
      }
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk), cand.end(), better);
      auto& ids = out[i];
      ids.resize(kk);
      for (std::size_t j = 0; j < kk; ++j) ids[j] = static_cast<TokenId>(cand[j].id);
    }
  }
  return out;
}

namespace {

struct WorseFirst {
  bool operator()(const Scored& a, const Scored& b) const { return better(a, b); }
};
struct BestFirst {
  bool operator()(const Scored& a, const Scored& b) const { return better(b, a); }
};

// Generation-stamped visited marks, reused across searches on one thread.
struct Visited {
  std::vector<std::uint32_t> mark;
  std::uint32_t gen = 0;
  void reset(std::size_t n) {
    if (mark.size() < n) mark.assign(n, 0), gen = 0;
    if (++gen == 0) std::fill(mark.begin(), mark.end(), 0), gen = 1;
  }
  bool test_and_set(std::uint32_t i) {
    if (mark[i] == gen) return true;
    mark[i] = gen;
    return false;
  }
};

template <class ScoreFn, class Graph>
std::vector<Scored> beam_search(ScoreFn&& score_of, const Graph& graph,
                                std::span<const std::uint32_t> entries, std::size_t ef,
                                Visited& visited, std::size_t n) {
  visited.reset(n);
  std::priority_queue<Scored, std::vector<Scored>, BestFirst> frontier;
  std::priority_queue<Scored, std::vector<Scored>, WorseFirst> found;
  for (auto e : entries) {
    if (visited.test_and_set(e)) continue;
    Scored s{score_of(e), e};
    frontier.push(s);
    found.push(s);
    if (found.size() > ef) found.pop();
  }
  while (!frontier.empty()) {
    const Scored c = frontier.top();
    frontier.pop();
    if (found.size() >= ef && better(found.top(), c)) break;
    for (auto nb : graph[c.id]) {
      if (visited.test_and_set(nb)) continue;
      Scored s{score_of(nb), nb};
      if (found.size() < ef || better(s, found.top())) {
        frontier.push(s);
        found.push(s);
        if (found.size() > ef) found.pop();
      }
    }
  }
  std::vector<Scored> out;
  out.reserve(found.size());
  while (!found.empty()) out.push_back(found.top()), found.pop();
  std::sort(out.begin(), out.end(), better);
  return out;
}

}  // namespace

void CosineIndex::build_graph(const ApproxConfig& cfg) {
  const std::size_t max_degree = static_cast<std::size_t>(std::max(2, cfg.max_degree));
  const std::size_t links = std::max<std::size_t>(1, max_degree / 2);
  const std::size_t ef = static_cast<std::size_t>(std::max(cfg.ef_construction, static_cast<int>(links)));
  graph_.assign(n_, {});

  std::vector<std::uint32_t> order(n_);
  std::iota(order.begin(), order.end(), 0u);
  Rng rng = make_rng(cfg.seed, 0x4e5357);
  std::shuffle(order.begin(), order.end(), rng);
  entry_points_.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(8, n_)));

  Visited visited;
  std::vector<std::uint32_t> entries{order[0]};
  for (std::size_t t = 1; t < n_; ++t) {
    const std::uint32_t x = order[t];
    auto near = beam_search([&](std::uint32_t j) { return score(x, j); }, graph_, entries, ef,
                            visited, n_);
    const std::size_t m = std::min(links, near.size());
    for (std::size_t i = 0; i < m; ++i) {
      const std::uint32_t y = near[i].id;
      graph_[x].push_back(y);
      auto& back = graph_[y];
      back.push_back(x);
      if (back.size() > max_degree) {
        std::vector<Scored> keep;
        keep.reserve(back.size());
        for (auto z : back) keep.push_back({score(y, z), z});
        std::sort(keep.begin(), keep.end(), better);
        back.clear();
        for (std::size_t j = 0; j < max_degree; ++j) back.push_back(keep[j].id);
      }
    }
    if (entries.size() < entry_points_.size() && t < entry_points_.size()) entries.push_back(x);
  }
}

std::vector<TokenId> CosineIndex::graph_top_k(TokenId query, std::size_t k) const {
  thread_local Visited visited;
  const auto q = static_cast<std::uint32_t>(query);
  const std::size_t kk = std::min(k, n_ - 1);
  const std::size_t ef = std::max<std::size_t>({static_cast<std::size_t>(ef_search_), 4 * kk, kk + 1});
  std::vector<std::uint32_t> entries(entry_points_);
  entries.push_back(q);  // the query's own neighbourhood is the best place to start
  auto found = beam_search([&](std::uint32_t j) { return score(q, j); }, graph_, entries, ef,
                           visited, n_);
  std::vector<TokenId> ids;
  ids.reserve(kk);
  for (const auto& s : found) {
    if (s.id == q) continue;
    ids.push_back(static_cast<TokenId>(s.id));
    if (ids.size() == kk) break;
  }
  return ids;
}

double approximate_recall(const CosineIndex& index, std::size_t probes, std::size_t k,
                          std::uint64_t seed) {
  if (index.size() < 2) return 1.0;
  Rng rng = make_rng(seed, 0x7265);
  std::uniform_int_distribution<TokenId> pick(0, static_cast<TokenId>(index.size() - 1));
  double hits = 0, total = 0;
  for (std::size_t p = 0; p < probes; ++p) {
    const TokenId q = pick(rng);
    auto exact = index.exact_top_k(q, k);
    auto approx = index.top_k(q, k);
    std::sort(approx.begin(), approx.end());
    for (auto id : exact) hits += std::binary_search(approx.begin(), approx.end(), id) ? 1.0 : 0.0;
    total += static_cast<double>(exact.size());
  }
  return total > 0 ? hits / total : 1.0;
}

// ---------------------------------------------------------------------------

EvalResult evaluate(const EmbeddingModel& model, std::span<const TestPair> pairs,
                    const EvalOptions& opts) {
  if (opts.k < 1) throw ValidationError("k must be >= 1");
  const std::size_t n = model.rows();
  for (const auto& p : pairs) {
    if (p.query < 0 || static_cast<std::size_t>(p.query) >= n) {
      throw ValidationError("test query id " + std::to_string(p.query) + " has no embedding");
    }
  }

  const CosineIndex index(model, opts.mode, opts.approx);
  const auto k = static_cast<std::size_t>(opts.k);

  // Retrieve once per distinct query.
  std::vector<std::int32_t> slot(n, -1);
  std::vector<TokenId> queries;
  for (const auto& p : pairs) {
    if (p.query == p.target && !opts.keep_self_pairs) continue;
    auto& s = slot[static_cast<std::size_t>(p.query)];
    if (s < 0) {
      s = static_cast<std::int32_t>(queries.size());
      queries.push_back(p.query);
    }
  }
  std::vector<std::vector<TokenId>> neighbours;
  if (opts.mode == IndexMode::kExact) {
    neighbours = index.exact_top_k_batch(queries, k, opts.workers);
  } else {
    neighbours.resize(queries.size());
    const auto nq = static_cast<std::int64_t>(queries.size());
#pragma omp parallel for schedule(dynamic, 16) num_threads(std::max(1, opts.workers))
    for (std::int64_t i = 0; i < nq; ++i) {
      neighbours[static_cast<std::size_t>(i)] = index.top_k(queries[static_cast<std::size_t>(i)], k);
    }
  }

  // Rank histogram keeps the reduction independent of pair order.
  std::vector<std::uint64_t> at_rank(k + 1, 0);
  EvalResult res;
  res.k = opts.k;
  for (const auto& p : pairs) {
    if (p.query == p.target && !opts.keep_self_pairs) {
      ++res.n_discarded;
      continue;
    }
    ++res.n_pairs;
    int rank = -1;
    if (p.target != kUnknownToken) {
      const auto& nb = neighbours[static_cast<std::size_t>(slot[static_cast<std::size_t>(p.query)])];
      auto it = std::find(nb.begin(), nb.end(), p.target);
      if (it != nb.end()) rank = static_cast<int>(it - nb.begin()) + 1;
    }
    if (rank > 0) ++at_rank[static_cast<std::size_t>(rank)];
    if (opts.record_pairs) res.per_pair.push_back({p.query, p.target, rank});
  }
  if (res.n_pairs == 0) throw ValidationError("no test pairs left to evaluate");

  std::uint64_t hits = 0;
  double gain = 0;
  for (std::size_t r = 1; r <= k; ++r) {
    hits += at_rank[r];
    gain += static_cast<double>(at_rank[r]) * ndcg_gain(static_cast<int>(r));
  }
  const auto total = static_cast<double>(res.n_pairs);
  res.hr_at_k = 100.0 * static_cast<double>(hits) / total;
  res.ndcg_at_k = gain / total;
  return res;
}

MeanCi mean_ci95(std::span<const double> values) {
  MeanCi out;
  const std::size_t r = values.size();
  if (r == 0) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(r);
  if (r < 2) return out;
  double ss = 0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  const double sd = std::sqrt(ss / static_cast<double>(r - 1));
  const boost::math::students_t dist(static_cast<double>(r - 1));
  out.half_width = boost::math::quantile(dist, 0.975) * sd / std::sqrt(static_cast<double>(r));
  return out;
}

RunSummary aggregate_runs(std::span<const EvalResult> results) {
  std::vector<double> hr, ndcg;
  for (const auto& r : results) {
    hr.push_back(r.hr_at_k);
    ndcg.push_back(r.ndcg_at_k);
  }
  return {mean_ci95(hr), mean_ci95(ndcg), results.size()};
}

}  // namespace w2vt
