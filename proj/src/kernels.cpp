#include "gym/kernels.hpp"

#include <stdexcept>

#include "gym/random.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gym::kernels {

namespace {

double state_probability(const cpt_tables& t, std::uint32_t state) {
  double p = 1.0;
  for (int v = 0; v < t.node_count; ++v) {
    double on = t.table[static_cast<std::size_t>(v)]
                       [parent_bits(t.parents[static_cast<std::size_t>(v)], state)];
    p *= ((state >> v) & 1u) ? on : 1.0 - on;
  }
  return p;
}

void fill_block(const cpt_tables& t, const std::vector<int>& topo_order, std::uint64_t lo,
                std::uint64_t hi, std::uint64_t seed, std::vector<std::uint32_t>& rows) {
  rng r(derive_seed(seed, lo / k_sample_block));
  for (std::uint64_t i = lo; i < hi; ++i) {
    std::uint32_t state = 0;
    for (int v : topo_order) {
      double on = t.table[static_cast<std::size_t>(v)]
                         [parent_bits(t.parents[static_cast<std::size_t>(v)], state)];
      if (r.u01() <= on) state |= 1u << v;
    }
    rows[i] = state;
  }
}

}  // namespace

void joint_table_serial(const cpt_tables& t, std::vector<double>& out) {
  std::uint64_t states = 1ull << t.node_count;
  out.resize(states);
  for (std::uint64_t s = 0; s < states; ++s)
    out[s] = state_probability(t, static_cast<std::uint32_t>(s));
}

void joint_table_parallel(const cpt_tables& t, std::vector<double>& out) {
  std::int64_t states = 1ll << t.node_count;
  out.resize(static_cast<std::size_t>(states));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::int64_t s = 0; s < states; ++s)
    out[static_cast<std::size_t>(s)] = state_probability(t, static_cast<std::uint32_t>(s));
}

std::vector<std::uint32_t> sample_rows_serial(const cpt_tables& t,
                                              const std::vector<int>& topo_order,
                                              std::uint64_t count, std::uint64_t seed) {
  std::vector<std::uint32_t> rows(count);
  for (std::uint64_t lo = 0; lo < count; lo += k_sample_block)
    fill_block(t, topo_order, lo, std::min(count, lo + k_sample_block), seed, rows);
  return rows;
}

std::vector<std::uint32_t> sample_rows_parallel(const cpt_tables& t,
                                                const std::vector<int>& topo_order,
                                                std::uint64_t count, std::uint64_t seed) {
  std::vector<std::uint32_t> rows(count);
  std::int64_t blocks = static_cast<std::int64_t>((count + k_sample_block - 1) / k_sample_block);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::int64_t b = 0; b < blocks; ++b) {
    std::uint64_t lo = static_cast<std::uint64_t>(b) * k_sample_block;
    fill_block(t, topo_order, lo, std::min(count, lo + k_sample_block), seed, rows);
  }
  return rows;
}

std::array<double, 2> chunked_sum_serial(std::uint64_t total, const chunk_fn& chunk_sum) {
  std::array<double, 2> acc{0.0, 0.0};
  for (std::uint64_t lo = 0; lo < total; lo += k_chunk) {
    std::array<double, 2> part = chunk_sum(lo, std::min(total, lo + k_chunk));
    acc[0] += part[0];
    acc[1] += part[1];
  }
  return acc;
}

std::array<double, 2> chunked_sum_parallel(std::uint64_t total, const chunk_fn& chunk_sum) {
  std::int64_t chunks = static_cast<std::int64_t>((total + k_chunk - 1) / k_chunk);
  std::vector<std::array<double, 2>> parts(static_cast<std::size_t>(chunks), {0.0, 0.0});
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
  for (std::int64_t c = 0; c < chunks; ++c) {
    std::uint64_t lo = static_cast<std::uint64_t>(c) * k_chunk;
    parts[static_cast<std::size_t>(c)] = chunk_sum(lo, std::min(total, lo + k_chunk));
  }
  std::array<double, 2> acc{0.0, 0.0};
  for (const auto& part : parts) {
    acc[0] += part[0];
    acc[1] += part[1];
  }
  return acc;
}

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_thread_count(int n) {
  if (n < 1) throw std::invalid_argument("thread count must be positive");
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace gym::kernels
