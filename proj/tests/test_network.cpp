#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "efiln/activation.hpp"
#include "efiln/errors.hpp"
#include "efiln/network.hpp"
#include "efiln/rng.hpp"
#include "grad_check.hpp"

using namespace efiln;

TEST_SUITE("network") {

TEST_CASE("reference architecture parameter count") {
  const auto a = Architecture::reference();
  CHECK(a.widths.size() == 10);
  CHECK(a.widths.front() == 3);
  CHECK(a.widths.back() == 3);
  std::size_t by_hand = 0;
  for (std::size_t l = 0; l + 1 < a.widths.size(); ++l) by_hand += a.widths[l] * a.widths[l + 1] + a.widths[l + 1];
  CHECK(by_hand == 2019);
  CHECK(a.parameter_count() == 2019);
  CHECK(Architecture::mlp(2, 16).parameter_count() == 3 * 16 + 16 + 16 * 16 + 16 + 16 * 3 + 3);
  CHECK(init_network(a, 1).flatten().size() == 2019);
}

TEST_CASE("architecture validation") {
  CHECK_THROWS_AS((Architecture{{3, 0, 3}}.validate()), ConfigError);
  CHECK_THROWS_AS((Architecture{{2, 4, 3}}.validate()), ConfigError);
  CHECK_NOTHROW((Architecture{{3, 4, 3}}.validate()));
}

TEST_CASE("glorot init") {
  const auto p = init_network(Architecture::reference(), 42);
  for (const auto& l : p.layers()) {
    const double a = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    for (double b : l.biases) CHECK(b == 0.0);
    for (double w : l.weights) {
      CHECK(w > -a);
      CHECK(w < a);
    }
  }
  CHECK(init_network(Architecture::reference(), 42) == p);
  CHECK_FALSE(init_network(Architecture::reference(), 43) == p);
}

TEST_CASE("zero network outputs zero") {
  const auto arch = Architecture::reference();
  const auto p = NetworkParams::unflatten(arch, std::vector<double>(arch.parameter_count(), 0.0));
  const auto out = forward(p, FieldVector{0.3, -2.0, 7.5});
  CHECK(out.x == 0.0);
  CHECK(out.y == 0.0);
  CHECK(out.z == 0.0);
}

TEST_CASE("hand-computed toy network") {
  NetworkParams p(Architecture::mlp(1, 2));
  auto& h = p.layers()[0];
  h.weights = {0.5, -0.25, 0.125, -1.0, 0.75, 0.3};
  h.biases = {0.1, -0.2};
  auto& o = p.layers()[1];
  o.weights = {1.0, 2.0, -0.5, 0.25, 0.0, -3.0};
  o.biases = {0.01, 0.02, 0.03};
  const double in[3] = {0.2, 0.4, 0.6};
  const double h0 = std::tanh(0.5 * 0.2 - 0.25 * 0.4 + 0.125 * 0.6 + 0.1);
  const double h1 = std::tanh(-1.0 * 0.2 + 0.75 * 0.4 + 0.3 * 0.6 - 0.2);
  const double want[3] = {1.0 * h0 + 2.0 * h1 + 0.01, -0.5 * h0 + 0.25 * h1 + 0.02, -3.0 * h1 + 0.03};
  const auto got = forward(p, FieldVector{in[0], in[1], in[2]});
  for (int a = 0; a < 3; ++a) CHECK(std::abs(got[a] - want[a]) < 1e-12);
}

TEST_CASE("tanh kernel accuracy") {
  Rng rng(5);
  double worst = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double x = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform(-12, 2));
    const double ref = std::tanh(x);
    const double got = tanh_fast(x);
    const double rel = ref == 0.0 ? std::abs(got) : std::abs(got - ref) / std::abs(ref);
    worst = std::max(worst, rel);
  }
  CHECK(worst < 2e-15);
  CHECK(tanh_fast(0.0) == 0.0);
  CHECK(tanh_fast(100.0) == 1.0);
  CHECK(tanh_fast(-100.0) == -1.0);
  CHECK(tanh_fast(-1e-300) == -1e-300);
}

TEST_CASE("vector tanh path equals the scalar kernel bitwise") {
  Rng rng(6);
  std::vector<double> x(1003), y(x.size());
  for (auto& v : x) v = rng.uniform(-25, 25) * (rng.below(4) == 0 ? 1e-9 : 1.0);
  x[0] = 0.0;
  x[1] = -0.0;
  x[2] = 20.0;
  x[3] = -1e300;
  tanh_inplace(x, y);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::bit_cast<std::uint64_t>(y[i]) == std::bit_cast<std::uint64_t>(tanh_fast(x[i])));
}

TEST_CASE("hidden activations lie in (-1, 1)") {
  const auto p = init_network(Architecture::reference(), 3);
  Rng rng(8);
  std::vector<double> input(3 * 64);
  for (auto& v : input) v = rng.uniform(-3, 3);
  const auto trace = forward(p, input, 64);
  CHECK(trace.layers.size() == p.architecture().layer_count());
  for (std::size_t l = 0; l + 1 < trace.layers.size(); ++l)
    for (double v : trace.layers[l].post) {
      CHECK(v > -1.0);
      CHECK(v < 1.0);
    }
}

TEST_CASE("batched forward equals per-sample forward bitwise") {
  const auto p = init_network(Architecture::reference(), 11);
  Rng rng(12);
  for (std::size_t batch : {1u, 3u, 8u, 17u, 100u}) {
    std::vector<FieldVector> fields(batch);
    for (auto& f : fields) f = {rng.uniform(), rng.uniform(), rng.uniform()};
    std::vector<double> input(3 * batch);
    for (std::size_t s = 0; s < batch; ++s)
      for (int a = 0; a < 3; ++a) input[a * batch + s] = fields[s][a];
    const auto trace = forward(p, input, batch);
    const auto out = trace.output();
    for (std::size_t s = 0; s < batch; ++s) {
      const auto single = forward(p, fields[s]);
      for (int a = 0; a < 3; ++a) CHECK(out[a * batch + s] == single[a]);
    }
  }
}

TEST_CASE("flatten and unflatten are inverse") {
  const auto arch = Architecture::mlp(3, 5);
  Rng rng(1);
  std::vector<double> v(arch.parameter_count());
  for (auto& x : v) x = rng.normal();
  const auto p = NetworkParams::unflatten(arch, v);
  CHECK(p.flatten() == v);
  CHECK(NetworkParams::unflatten(arch, p.flatten()) == p);
  CHECK_THROWS_AS(NetworkParams::unflatten(arch, std::vector<double>(v.size() - 1)), ShapeMismatch);
}

TEST_CASE("backward basics") {
  const auto p = init_network(Architecture::reference(), 2);
  Rng rng(3);
  const std::size_t batch = 9;
  std::vector<double> input(3 * batch), og(3 * batch);
  for (auto& v : input) v = rng.uniform();
  for (auto& v : og) v = rng.normal();
  const auto trace = forward(p, input, batch);
  const auto zero = backward(p, trace, std::vector<double>(3 * batch, 0.0));
  for (double g : zero) CHECK(g == 0.0);
  const auto g = backward(p, trace, og);
  // last three entries are the output biases
  for (int a = 0; a < 3; ++a) {
    double sum = 0.0;
    for (std::size_t s = 0; s < batch; ++s) sum += og[a * batch + s];
    CHECK(std::abs(g[g.size() - 3 + a] - sum) <= 1e-14 * (1.0 + std::abs(sum)));
  }
  CHECK_THROWS_AS(backward(p, trace, std::vector<double>(3 * batch - 1)), ShapeMismatch);
}

TEST_CASE("analytic gradient matches finite differences") {
  const LossWeights w;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto p = init_network(Architecture::reference(), seed);
    const auto batch = gradcheck::toy_batch(32, seed + 100);
    const auto r = gradcheck::check(p, batch, w, 200, seed + 200);
    CHECK(r.checked == 200);
    CHECK(r.worst < 1e-6);
  }
}

TEST_CASE("checkpoint round trip") {
  Checkpoint c{init_network(Architecture::reference(), 9), {}};
  c.stats.pos_min = {10, 10, 10};
  c.stats.pos_max = {60, 60, 60};
  c.stats.field_min = {-1e9, -2e9, 3.5e8};
  c.stats.field_max = {1e9, 2e9, 1e10 / 3};
  const auto bytes = serialize_checkpoint(c);
  CHECK(bytes.substr(0, 8) == "EFILNCKP");
  CHECK(deserialize_checkpoint(bytes) == c);
  const auto path = std::filesystem::temp_directory_path() / "efiln_ckpt_test.bin";
  save_checkpoint(c, path);
  CHECK(load_checkpoint(path) == c);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 1)), IoError);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(bad), IoError);
}

}  // TEST_SUITE
