#include <cstdint>
#include <vector>

#include "doctest.h"
#include "rtdlab/core/ops.hpp"
#include "support/gradcheck.hpp"

using gradtest::Td;
using rtdlab::Rng;
using rtdlab::Shape;

namespace {

constexpr double kTol = 1e-4;
constexpr int kTrials = 12;

std::size_t rand_dim(Rng& rng, std::size_t lo = 1, std::size_t hi = 4) {
  return lo + static_cast<std::size_t>(rng.uniform_below(hi - lo + 1));
}

Shape rand_shape(Rng& rng, std::size_t rank, std::size_t lo = 1, std::size_t hi = 4) {
  Shape s(rank);
  for (auto& d : s) d = rand_dim(rng, lo, hi);
  return s;
}

}  // namespace

TEST_SUITE("gradcheck") {
  TEST_CASE("add, same shape and broadcast") {
    Rng rng(101);
    for (int t = 0; t < kTrials; ++t) {
      Shape a = rand_shape(rng, rand_dim(rng, 1, 3));
      auto rep = gradtest::check({a, a}, [](const std::vector<Td>& in) {
        return rtdlab::add(in[0], in[1]);
      }, rng);
      CHECK(rep.max_rel_err < kTol);

      Shape big = rand_shape(rng, 3);
      Shape suffix(big.end() - 1, big.end());
      auto rep2 = gradtest::check({big, suffix}, [](const std::vector<Td>& in) {
        return rtdlab::add(in[0], in[1]);
      }, rng);
      CHECK(rep2.max_rel_err < kTol);
    }
  }

  TEST_CASE("mul and scale") {
    Rng rng(102);
    for (int t = 0; t < kTrials; ++t) {
      Shape a = rand_shape(rng, rand_dim(rng, 1, 3));
      auto rep = gradtest::check({a, a}, [](const std::vector<Td>& in) {
        return rtdlab::mul(in[0], in[1]);
      }, rng);
      CHECK(rep.max_rel_err < kTol);

      const double c = rng.uniform() * 4.0 - 2.0;
      auto rep2 = gradtest::check({a}, [c](const std::vector<Td>& in) {
        return rtdlab::scale(in[0], c);
      }, rng);
      CHECK(rep2.max_rel_err < kTol);
    }
  }

  TEST_CASE("matmul with shared and batched right-hand sides") {
    Rng rng(103);
    for (int t = 0; t < kTrials; ++t) {
      const std::size_t m = rand_dim(rng), k = rand_dim(rng), n = rand_dim(rng);
      auto rep = gradtest::check({{m, k}, {k, n}}, [](const std::vector<Td>& in) {
        return rtdlab::matmul(in[0], in[1]);
      }, rng);
      CHECK(rep.max_rel_err < kTol);

      const std::size_t b = rand_dim(rng, 1, 3);
      auto rep2 = gradtest::check({{b, m, k}, {k, n}}, [](const std::vector<Td>& in) {
        return rtdlab::matmul(in[0], in[1]);
      }, rng);
      CHECK(rep2.max_rel_err < kTol);

      auto rep3 = gradtest::check({{b, m, k}, {b, k, n}}, [](const std::vector<Td>& in) {
        return rtdlab::matmul(in[0], in[1]);
      }, rng);
      CHECK(rep3.max_rel_err < kTol);
    }
  }

  TEST_CASE("softmax and log_softmax") {
    Rng rng(104);
    for (int t = 0; t < kTrials; ++t) {
      Shape s = rand_shape(rng, rand_dim(rng, 1, 3), 2, 5);
      auto rep = gradtest::check({s}, [](const std::vector<Td>& in) {
        return rtdlab::softmax(in[0]);
      }, rng, 2.0);
      CHECK(rep.max_rel_err < kTol);

      auto rep2 = gradtest::check({s}, [](const std::vector<Td>& in) {
        return rtdlab::log_softmax(in[0]);
      }, rng, 2.0);
      CHECK(rep2.max_rel_err < kTol);
    }
  }

  TEST_CASE("masked_softmax with random key masks") {
    Rng rng(105);
    for (int t = 0; t < kTrials; ++t) {
      const std::size_t batch = rand_dim(rng, 1, 3);
      const std::size_t rows = rand_dim(rng, 1, 3);
      const std::size_t cols = rand_dim(rng, 2, 5);
      std::vector<std::uint8_t> mask(batch * cols);
      for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = (i % cols == 0) ? 1 : static_cast<std::uint8_t>(rng.uniform() < 0.7);
      }
      auto rep = gradtest::check({{batch, rows, cols}}, [mask](const std::vector<Td>& in) {
        return rtdlab::masked_softmax(in[0], mask);
      }, rng, 2.0);
      CHECK(rep.max_rel_err < kTol);
    }
  }

  TEST_CASE("layer_norm over inputs, gain, and bias") {
    Rng rng(106);
    for (int t = 0; t < kTrials; ++t) {
      const std::size_t rows = rand_dim(rng, 1, 4);
      const std::size_t cols = rand_dim(rng, 2, 6);
      auto rep = gradtest::check({{rows, cols}, {cols}, {cols}},
                                 [](const std::vector<Td>& in) {
                                   return rtdlab::layer_norm(in[0], in[1], in[2], 1e-12);
                                 },
                                 rng);
      CHECK(rep.max_rel_err < kTol);
    }
  }

  TEST_CASE("gelu and sigmoid") {
    Rng rng(107);
    for (int t = 0; t < kTrials; ++t) {
      Shape s = rand_shape(rng, rand_dim(rng, 1, 3));
      auto rep = gradtest::check({s}, [](const std::vector<Td>& in) {
        return rtdlab::gelu(in[0]);
      }, rng, 3.0);
      CHECK(rep.max_rel_err < kTol);

      auto rep2 = gradtest::check({s}, [](const std::vector<Td>& in) {
        return rtdlab::sigmoid(in[0]);
      }, rng, 3.0);
      CHECK(rep2.max_rel_err < kTol);
    }
  }

  TEST_CASE("reshape, transpose, slice, concat") {
    Rng rng(108);
    for (int t = 0; t < kTrials; ++t) {
      const std::size_t a = rand_dim(rng), b = rand_dim(rng), c = rand_dim(rng);
      auto rep = gradtest::check({{a, b, c}}, [a, b, c](const std::vector<Td>& in) {
        return rtdlab::reshape(in[0], {a * b, c});
      }, rng);
      CHECK(rep.max_rel_err < kTol);

      const std::size_t d0 = rng.uniform_below(3), d1 = rng.uniform_below(3);
      auto rep2 = gradtest::check({{a, b, c}}, [d0, d1](const std::vector<Td>& in) {
        return rtdlab::transpose(in[0], d0, d1);
      }, rng);
      CHECK(rep2.max_rel_err < kTol);

      const std::size_t axis = rng.uniform_below(3);
      Shape s{a + 1, b + 1, c + 1};
      const std::size_t len = 1 + rng.uniform_below(s[axis]);
      const std::size_t start = rng.uniform_below(s[axis] - len + 1);
      auto rep3 = gradtest::check({s}, [axis, start, len](const std::vector<Td>& in) {
        return rtdlab::slice(in[0], axis, start, len);
      }, rng);
      CHECK(rep3.max_rel_err < kTol);

      Shape left{a, b}, right{a + rng.uniform_below(3), b};
      auto rep4 = gradtest::check({left, right}, [](const std::vector<Td>& in) {
        return rtdlab::concat({in[0], in[1]}, 0);
      }, rng);
      CHECK(rep4.max_rel_err < kTol);
    }
  }

  TEST_CASE("gather_rows with repeated indices") {
    Rng rng(109);
    for (int t = 0; t < kTrials; ++t) {
      const std::size_t n = rand_dim(rng, 2, 6), d = rand_dim(rng, 1, 4);
      std::vector<std::int32_t> idx(rand_dim(rng, 1, 6));
      for (auto& i : idx) i = static_cast<std::int32_t>(rng.uniform_below(n));
      auto rep = gradtest::check({{n, d}}, [idx](const std::vector<Td>& in) {
        return rtdlab::gather_rows(in[0], idx);
      }, rng);
      CHECK(rep.max_rel_err < kTol);
    }
  }

  TEST_CASE("reductions") {
    Rng rng(110);
    for (int t = 0; t < kTrials; ++t) {
      Shape s = rand_shape(rng, rand_dim(rng, 1, 3));
      auto rep = gradtest::check({s}, [](const std::vector<Td>& in) {
        return rtdlab::reduce_sum(in[0]);
      }, rng);
      CHECK(rep.max_rel_err < kTol);

      auto rep2 = gradtest::check({s}, [](const std::vector<Td>& in) {
        return rtdlab::reduce_mean(in[0]);
      }, rng);
      CHECK(rep2.max_rel_err < kTol);
    }
  }

  TEST_CASE("cross_entropy with ignored rows") {
    Rng rng(111);
    for (int t = 0; t < kTrials; ++t) {
      const std::size_t n = rand_dim(rng, 2, 6), c = rand_dim(rng, 2, 6);
      std::vector<std::int32_t> targets(n);
      for (std::size_t i = 0; i < n; ++i) {
        targets[i] = (i > 0 && rng.uniform() < 0.25)
                         ? -1
                         : static_cast<std::int32_t>(rng.uniform_below(c));
      }
      auto rep = gradtest::check({{n, c}}, [targets](const std::vector<Td>& in) {
        return rtdlab::cross_entropy(in[0], targets, -1);
      }, rng, 2.0);
      CHECK(rep.max_rel_err < kTol);
    }
  }

  TEST_CASE("binary cross entropy on logits and labels") {
    Rng rng(112);
    for (int t = 0; t < kTrials; ++t) {
      Shape s = rand_shape(rng, rand_dim(rng, 1, 3));
      auto labels = gradtest::random_values(s, rng, 0.5);
      for (auto& z : labels) z += 0.5;  // keep labels in [0, 1]
      auto rep = gradtest::check(
          {s, s},
          {gradtest::random_values(s, rng, 2.0), labels},
          [](const std::vector<Td>& in) {
            return rtdlab::binary_cross_entropy_with_logits(in[0], in[1]);
          },
          rng);
      CHECK(rep.max_rel_err < kTol);
    }
  }

  TEST_CASE("a composite expression wires everything together") {
    Rng rng(113);
    // two-layer toy block: layer_norm(gelu(x W1 + b1)) W2 then softmax rows
    for (int t = 0; t < 4; ++t) {
      const std::size_t n = rand_dim(rng, 2, 4), d = rand_dim(rng, 2, 4),
                        h = rand_dim(rng, 2, 4);
      auto rep = gradtest::check(
          {{n, d}, {d, h}, {h}, {h}, {h}, {h, d}},
          [](const std::vector<Td>& in) {
            auto a = rtdlab::gelu(rtdlab::add(rtdlab::matmul(in[0], in[1]), in[2]));
            auto ln = rtdlab::layer_norm(a, in[3], in[4], 1e-12);
            return rtdlab::softmax(rtdlab::matmul(ln, in[5]));
          },
          rng);
      CHECK(rep.max_rel_err < kTol);
    }
  }
}
