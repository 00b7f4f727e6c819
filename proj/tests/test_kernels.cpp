#include <cstdint>
#include <vector>

#include "doctest.h"
#include "gym/graph.hpp"
#include "gym/kernels.hpp"
#include "gym/random.hpp"
#include "gym/scm.hpp"

using namespace gym;
using namespace gym::kernels;

namespace {

cpt_tables random_tables(int n, double density, std::uint64_t seed) {
  vocabulary empty = vocabulary::parse("");
  dag g = generate_dag(n, density, seed);
  labeled_dag l = assign_semantics(g, semantics_mode::fake, empty, derive_seed(seed, 1));
  return instantiate_scm(l, derive_seed(seed, 2)).tables();
}

// runs f under each thread count and checks the outputs are bitwise equal
template <typename F>
void across_thread_counts(const F& f) {
  int saved = thread_count();
  auto baseline = f();
  for (int t : {1, 2, 3, 8}) {
    set_thread_count(t);
    auto got = f();
    CHECK(got == baseline);
  }
  set_thread_count(saved);
}

}  // namespace

TEST_CASE("parent_bits packs parent values in list order") {
  // state 0b1010: node 1 and node 3 are set
  CHECK(parent_bits({1, 3}, 0b1010u) == 0b11u);
  CHECK(parent_bits({0, 3}, 0b1010u) == 0b10u);
  CHECK(parent_bits({2}, 0b1010u) == 0b0u);
  CHECK(parent_bits({}, 0b1010u) == 0b0u);
}

TEST_CASE("joint table: parallel is bitwise identical to serial") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    cpt_tables t = random_tables(4 + static_cast<int>(seed % 9), 0.5, seed);
    std::vector<double> serial;
    joint_table_serial(t, serial);
    across_thread_counts([&] {
      std::vector<double> out;
      joint_table_parallel(t, out);
      return out;
    });
    std::vector<double> parallel;
    joint_table_parallel(t, parallel);
    CHECK(parallel == serial);
  }
}

TEST_CASE("sample rows: parallel is identical to serial across block boundaries") {
  cpt_tables t = random_tables(8, 0.5, 33);
  std::vector<int> topo = topological_order(generate_dag(8, 0.5, 33));
  for (std::uint64_t count :
       {std::uint64_t{0}, std::uint64_t{1}, k_sample_block - 1, k_sample_block,
        k_sample_block + 1, std::uint64_t{3} * k_sample_block + 17}) {
    std::vector<std::uint32_t> serial = sample_rows_serial(t, topo, count, 99);
    CHECK(serial.size() == count);
    across_thread_counts([&] { return sample_rows_parallel(t, topo, count, 99); });
    CHECK(sample_rows_parallel(t, topo, count, 99) == serial);
  }
}

TEST_CASE("sample rows depend on the seed") {
  cpt_tables t = random_tables(6, 0.5, 5);
  std::vector<int> topo = topological_order(generate_dag(6, 0.5, 5));
  CHECK(sample_rows_serial(t, topo, 1000, 1) != sample_rows_serial(t, topo, 1000, 2));
}

TEST_CASE("chunked sums: parallel equals serial, totals are right") {
  // accumulate [sum of i, count] over a range crossing many chunk boundaries
  std::uint64_t total = 5 * k_chunk + 123;
  chunk_fn f = [](std::uint64_t lo, std::uint64_t hi) -> std::array<double, 2> {
    double s = 0, c = 0;
    for (std::uint64_t i = lo; i < hi; ++i) {
      s += static_cast<double>(i % 1024);
      c += 1.0;
    }
    return {s, c};
  };
  std::array<double, 2> serial = chunked_sum_serial(total, f);
  CHECK(serial[1] == static_cast<double>(total));
  double expect = 0;
  for (std::uint64_t i = 0; i < total; ++i) expect += static_cast<double>(i % 1024);
  CHECK(serial[0] == expect);  // identical order of additions
  across_thread_counts([&] { return chunked_sum_parallel(total, f); });
  CHECK(chunked_sum_parallel(total, f) == serial);
  // empty range
  std::array<double, 2> zero = chunked_sum_serial(0, f);
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);
}

TEST_CASE("thread count setter round-trips") {
  int saved = thread_count();
  set_thread_count(3);
#ifdef _OPENMP
  CHECK(thread_count() == 3);
#else
  CHECK(thread_count() == 1);
#endif
  set_thread_count(saved);
  CHECK(thread_count() == saved);
}
