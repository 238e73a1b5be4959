#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "gwe/adagrad.hpp"
#include "gwe/error.hpp"
#include "gwe/matrix.hpp"
#include "gwe/rng.hpp"
#include "gwe/tensor_file.hpp"
#include "gwe/utf8.hpp"

using namespace gwe;

TEST_CASE("rng streams are reproducible and substreams differ") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(derive_seed(7, "init") == derive_seed(7, "init"));
  CHECK(derive_seed(7, "init") != derive_seed(7, "negatives"));
  CHECK(derive_seed(7, std::uint64_t{0}) != derive_seed(7, std::uint64_t{1}));
}

TEST_CASE("rng distributions stay in range") {
  Rng rng(1);
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(rng.below(7) < 7u);
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / 20000) < 0.03);
  CHECK(std::abs(sq / 20000 - 1.0) < 0.05);

  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  rng.shuffle(v.begin(), v.end());
  CHECK(std::set<int>(v.begin(), v.end()).size() == 8);
}

TEST_CASE("matrix helpers") {
  Matrix m(2, 3);
  m(1, 2) = 5.0;
  CHECK(m.row(1)[2] == 5.0);
  std::vector<double> x{1, 2, 3}, y{1, 1, 1};
  CHECK(dot(x, y) == 6.0);
  axpy(2.0, x, y);
  CHECK(y == std::vector<double>{3, 5, 7});
  CHECK(norm(std::vector<double>{3, 4}) == 5.0);
  const auto c = checksum(m.values());
  m(0, 0) = 1e-300;
  CHECK(checksum(m.values()) != c);
}

TEST_CASE("utf8 round trip and errors") {
  const std::string s = "中文a";
  const auto cps = utf8::decode(s);
  REQUIRE(cps.size() == 3);
  CHECK(cps[0] == 0x4E2D);
  CHECK(utf8::encode(cps) == s);
  CHECK(utf8::codepoint_label(0x4E2D) == "U+4E2D");
  CHECK(utf8::parse_codepoint("U+4E2D") == 0x4E2D);
  CHECK(utf8::parse_codepoint("中") == 0x4E2D);

  try {
    utf8::decode(std::string("ab\xff"), 100);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kData);
    CHECK(std::string(e.what()).find("102") != std::string::npos);
  }
  CHECK_THROWS_AS(utf8::decode("\xe4\xb8"), Error);       // truncated
  CHECK_THROWS_AS(utf8::decode("\xc0\x80"), Error);       // overlong
  CHECK_THROWS_AS(utf8::decode("\xed\xa0\x80"), Error);   // surrogate
  CHECK_THROWS_AS(utf8::parse_codepoint("U+ZZ"), Error);
}

TEST_CASE("tensor file round trip is exact") {
  TensorFile f;
  f.kind = "demo";
  f.meta = {{"levels", 5}, {"neg", -3}};
  f.tensors.push_back({"a", {2, 2}, {1.0, -0.0, 1e-310, std::nextafter(1.0, 2.0)}});
  f.tensors.push_back({"empty", {0}, {}});
  std::stringstream ss;
  write_tensor_file(ss, f);
  const auto g = read_tensor_file(ss);
  CHECK(g == f);
  CHECK(std::signbit(g.tensor("a").data[1]));
  CHECK(g.meta_value("neg") == -3);
  CHECK_THROWS_AS(g.tensor("nope"), Error);
  CHECK_THROWS_AS(g.meta_value("nope"), Error);
}

TEST_CASE("tensor file rejects bad input") {
  std::stringstream bad("NOTATENSORFILE");
  CHECK_THROWS_AS(read_tensor_file(bad), Error);

  TensorFile f;
  f.kind = "x";
  f.tensors.push_back({"t", {3}, {1, 2, 3}});
  std::stringstream ss;
  write_tensor_file(ss, f);
  auto bytes = ss.str();
  bytes.resize(bytes.size() - 4);
  std::stringstream cut(bytes);
  CHECK_THROWS_AS(read_tensor_file(cut), Error);
}

TEST_CASE("adagrad matches the closed form") {
  std::vector<double> p{1.0, 2.0, 3.0};
  const std::vector<double> g{0.5, 0.0, -2.0};
  AdagradState st;
  adagrad_step(p, g, st, 0.1);
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-15));
  CHECK(p[1] == 2.0);
  CHECK(p[2] == doctest::Approx(3.0 + 0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-15));
  adagrad_step(p, g, st, 0.1);
  CHECK(st.accum[0] == doctest::Approx(0.5));
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8) - 0.1 * 0.5 / (std::sqrt(0.5) + 1e-8)));
}
