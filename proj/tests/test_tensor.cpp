#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "rtdlab/core/ops.hpp"
#include "rtdlab/core/tensor.hpp"

using rtdlab::Shape;
using Tf = rtdlab::Tensor<float>;

TEST_SUITE("tensor") {
  TEST_CASE("construction and shape accounting") {
    auto t = Tf::zeros({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rank() == 2);
    CHECK(t.dim(1) == 3);
    CHECK(rtdlab::shape_str(t.shape()) == "[2, 3]");
    for (float v : t.values()) CHECK(v == 0.0f);

    auto f = Tf::full({4}, 2.5f);
    for (float v : f.values()) CHECK(v == 2.5f);

    CHECK_THROWS_AS(Tf::from({2, 2}, {1.0f, 2.0f}), std::invalid_argument);
    CHECK(Tf::scalar(3.0f).item() == 3.0f);
    CHECK_THROWS_AS((void)Tf::zeros({2}).item(), std::invalid_argument);
  }

  TEST_CASE("copies share the node, detach does not") {
    auto a = Tf::from({2}, {1.0f, 2.0f});
    Tf b = a;
    b.values()[0] = 9.0f;
    CHECK(a.values()[0] == 9.0f);

    Tf d = a.detach();
    d.values()[0] = 5.0f;
    CHECK(a.values()[0] == 9.0f);
    CHECK(d.requires_grad() == false);
  }

  TEST_CASE("backward through a small expression") {
    // y = sum((a * b) + a), dy/da = b + 1, dy/db = a
    auto a = Tf::param({3}, {1.0f, 2.0f, 3.0f});
    auto b = Tf::param({3}, {4.0f, 5.0f, 6.0f});
    auto y = rtdlab::reduce_sum(rtdlab::add(rtdlab::mul(a, b), a));
    rtdlab::backward(y);
    CHECK(a.grad() == std::vector<float>{5.0f, 6.0f, 7.0f});
    CHECK(b.grad() == std::vector<float>{1.0f, 2.0f, 3.0f});
  }

  TEST_CASE("gradients accumulate when a tensor feeds multiple consumers") {
    auto x = Tf::param({2}, {3.0f, -1.0f});
    auto y = rtdlab::reduce_sum(rtdlab::add(x, x));
    rtdlab::backward(y);
    CHECK(x.grad() == std::vector<float>{2.0f, 2.0f});

    x.zero_grad();
    CHECK(x.grad() == std::vector<float>{0.0f, 0.0f});
  }

  TEST_CASE("backward demands a scalar loss") {
    auto x = Tf::param({2}, {1.0f, 2.0f});
    auto y = rtdlab::scale(x, 2.0f);
    CHECK_THROWS_WITH_AS(rtdlab::backward(y), doctest::Contains("[2]"), std::invalid_argument);
  }

  TEST_CASE("no gradient flows into tensors that do not require it") {
    auto a = Tf::param({2}, {1.0f, 1.0f});
    auto c = Tf::from({2}, {10.0f, 20.0f});
    auto y = rtdlab::reduce_sum(rtdlab::mul(a, c));
    rtdlab::backward(y);
    CHECK(a.grad() == std::vector<float>{10.0f, 20.0f});
    CHECK(c.has_grad() == false);
  }

  TEST_CASE("deep chains backpropagate without recursion limits") {
    auto x = Tf::param({1}, {1.0f});
    Tf y = x;
    for (int i = 0; i < 20000; ++i) y = rtdlab::scale(y, 1.0f);
    auto loss = rtdlab::reduce_sum(y);
    rtdlab::backward(loss);
    CHECK(x.grad()[0] == 1.0f);
  }

  TEST_CASE("diamond graphs run each backprop exactly once") {
    // y = (x*x) + (x*x) built as two distinct products sharing x
    auto x = Tf::param({1}, {3.0f});
    auto p1 = rtdlab::mul(x, x);
    auto p2 = rtdlab::mul(x, x);
    auto y = rtdlab::reduce_sum(rtdlab::add(p1, p2));
    rtdlab::backward(y);
    CHECK(x.grad()[0] == doctest::Approx(12.0f));
  }
}
