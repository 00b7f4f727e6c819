#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

namespace gym::kernels {

// Tabulated mechanisms of a binary-node model: for node v, parents[v] is the
// sorted parent list and table[v][bits] = P(v = 1 | parent values), where bit
// j of `bits` carries the value of parents[v][j].
struct cpt_tables {
  int node_count = 0;
  std::vector<std::vector<int>> parents;
  std::vector<std::vector<double>> table;
};

// Pack the parent values of node v out of a full state mask.
inline std::uint32_t parent_bits(const std::vector<int>& parents, std::uint32_t state) {
  std::uint32_t bits = 0;
  for (std::size_t j = 0; j < parents.size(); ++j)
    bits |= ((state >> parents[j]) & 1u) << j;
  return bits;
}

// Full joint table over 2^node_count states: out[state] = prod_v P(v = state_v | pa).
// Both variants produce bitwise-identical results; the parallel one splits the
// state range across threads with a static schedule.
void joint_table_serial(const cpt_tables& t, std::vector<double>& out);
void joint_table_parallel(const cpt_tables& t, std::vector<double>& out);

// Ancestral sampling of `count` full states. Rows are generated in fixed
// blocks of k_sample_block, each block from its own derived seed, so the
// output is identical for any thread count.
inline constexpr std::uint64_t k_sample_block = 4096;
std::vector<std::uint32_t> sample_rows_serial(const cpt_tables& t,
                                              const std::vector<int>& topo_order,
                                              std::uint64_t count, std::uint64_t seed);
std::vector<std::uint32_t> sample_rows_parallel(const cpt_tables& t,
                                                const std::vector<int>& topo_order,
                                                std::uint64_t count, std::uint64_t seed);

// Deterministic chunked reduction of two accumulators over [0, total):
// chunk_sum(lo, hi) returns the partial sums of its range; partials are added
// in chunk order, so serial and parallel results are bitwise identical.
inline constexpr std::uint64_t k_chunk = 1u << 14;
using chunk_fn = std::function<std::array<double, 2>(std::uint64_t, std::uint64_t)>;
std::array<double, 2> chunked_sum_serial(std::uint64_t total, const chunk_fn& chunk_sum);
std::array<double, 2> chunked_sum_parallel(std::uint64_t total, const chunk_fn& chunk_sum);

// Threads used by the *_parallel variants (OpenMP max threads; 1 without OpenMP).
int thread_count();
void set_thread_count(int n);

}  // namespace gym::kernels
