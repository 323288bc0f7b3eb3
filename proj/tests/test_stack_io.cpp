#include <doctest.h>

#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "testutil.hpp"
#include "twophoton/errors.hpp"
#include "twophoton/stack_io.hpp"

using namespace twophoton;
using testutil::TempDir;

namespace {

std::string float_bytes(const std::vector<float>& values) {
  std::string bytes(values.size() * 4, '\0');
  std::memcpy(bytes.data(), values.data(), bytes.size());
  return bytes;
}

} // namespace

TEST_CASE("load_stack reads a minimal header + payload pair") {
  TempDir dir;
  testutil::write_file(dir.file("mini.json"),
                       R"({"channels":1,"frames":1,"rows":1,"cols":2,)"
                       R"("dtype":"f32le","frame_period_s":0.125})");
  testutil::write_file(dir.file("mini.bin"), float_bytes({1.0f, 2.0f}));

  const ImageStack s = load_stack(dir.file("mini.json"));
  CHECK(s.channels == 1);
  CHECK(s.frames == 1);
  CHECK(s.rows == 1);
  CHECK(s.cols == 2);
  CHECK(s.frame_period_s == 0.125);
  REQUIRE(s.data.size() == 2);
  CHECK(s.data[0] == 1.0f);
  CHECK(s.data[1] == 2.0f);
}

TEST_CASE("save_stack then load_stack is bit-exact") {
  TempDir dir;
  const ImageStack original = testutil::random_stack(2, 3, 4, 5, 99);
  save_stack(original, dir.file("stack.json"));
  const ImageStack reread = load_stack(dir.file("stack.json"));
  CHECK(reread.channels == original.channels);
  CHECK(reread.frames == original.frames);
  CHECK(reread.rows == original.rows);
  CHECK(reread.cols == original.cols);
  CHECK(reread.frame_period_s == original.frame_period_s);
  REQUIRE(reread.data.size() == original.data.size());
  CHECK(std::memcmp(reread.data.data(), original.data.data(),
                    original.data.size() * 4) == 0);
}

TEST_CASE("save_stack overwrites an existing file") {
  TempDir dir;
  save_stack(testutil::random_stack(1, 1, 2, 2, 1), dir.file("s.json"));
  const ImageStack second = testutil::random_stack(1, 2, 3, 3, 2);
  save_stack(second, dir.file("s.json"));
  const ImageStack reread = load_stack(dir.file("s.json"));
  CHECK(reread.frames == second.frames);
  CHECK(std::memcmp(reread.data.data(), second.data.data(),
                    second.data.size() * 4) == 0);
}

TEST_CASE("load_stack error classes") {
  TempDir dir;

  SUBCASE("missing header file") {
    CHECK_THROWS_AS(load_stack(dir.file("absent.json")), IoError);
  }
  SUBCASE("malformed JSON") {
    testutil::write_file(dir.file("bad.json"), "{nope");
    CHECK_THROWS_AS(load_stack(dir.file("bad.json")), ParseError);
  }
  SUBCASE("missing header field") {
    testutil::write_file(dir.file("bad.json"), R"({"channels":1})");
    CHECK_THROWS_AS(load_stack(dir.file("bad.json")), ParseError);
  }
  SUBCASE("counts below one") {
    testutil::write_file(dir.file("bad.json"),
                         R"({"channels":0,"frames":1,"rows":1,"cols":1,)"
                         R"("dtype":"f32le","frame_period_s":0.125})");
    CHECK_THROWS_AS(load_stack(dir.file("bad.json")), FormatError);
  }
  SUBCASE("unsupported dtype") {
    testutil::write_file(dir.file("bad.json"),
                         R"({"channels":1,"frames":1,"rows":1,"cols":1,)"
                         R"("dtype":"f64le","frame_period_s":0.125})");
    CHECK_THROWS_AS(load_stack(dir.file("bad.json")), FormatError);
  }
  SUBCASE("payload size disagrees with the header") {
    testutil::write_file(dir.file("bad.json"),
                         R"({"channels":1,"frames":1,"rows":1,"cols":4,)"
                         R"("dtype":"f32le","frame_period_s":0.125})");
    testutil::write_file(dir.file("bad.bin"), float_bytes({1, 2, 3}));
    CHECK_THROWS_AS(load_stack(dir.file("bad.json")), SizeMismatchError);
  }
  SUBCASE("non-finite payload values") {
    testutil::write_file(dir.file("bad.json"),
                         R"({"channels":1,"frames":1,"rows":1,"cols":2,)"
                         R"("dtype":"f32le","frame_period_s":0.125})");
    testutil::write_file(
        dir.file("bad.bin"),
        float_bytes({1.0f, std::numeric_limits<float>::quiet_NaN()}));
    CHECK_THROWS_AS(load_stack(dir.file("bad.json")), DataIntegrityError);
  }
}

TEST_CASE("save_stack rejects unwritable destinations") {
  CHECK_THROWS_AS(save_stack(testutil::random_stack(1, 1, 1, 1, 0), ""),
                  IoError);
}

TEST_CASE("load_biosignal infers the rate from the median spacing") {
  TempDir dir;
  testutil::write_file(dir.file("heart.csv"),
                       "time_s,value\n0.000,300\n0.001,301\n");
  const BioSignal sig = load_biosignal(dir.file("heart.csv"));
  CHECK(sig.sample_rate_hz == doctest::Approx(1000.0).epsilon(1e-9));
  REQUIRE(sig.samples.size() == 2);
  CHECK(sig.samples[0] == 300.0);
  CHECK(sig.samples[1] == 301.0);
  CHECK(sig.label == "heart");
}

TEST_CASE("load_biosignal error classes") {
  TempDir dir;
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_biosignal(dir.file("none.csv")), IoError);
  }
  SUBCASE("wrong header") {
    testutil::write_file(dir.file("b.csv"), "t,v\n0,1\n1,2\n");
    CHECK_THROWS_AS(load_biosignal(dir.file("b.csv")), FormatError);
  }
  SUBCASE("single row leaves the rate underdetermined") {
    testutil::write_file(dir.file("b.csv"), "time_s,value\n0.0,1\n");
    CHECK_THROWS_AS(load_biosignal(dir.file("b.csv")), FormatError);
  }
  SUBCASE("unsorted times") {
    testutil::write_file(dir.file("b.csv"),
                         "time_s,value\n0.0,1\n0.002,2\n0.001,3\n");
    CHECK_THROWS_AS(load_biosignal(dir.file("b.csv")), FormatError);
  }
  SUBCASE("non-numeric cell") {
    testutil::write_file(dir.file("b.csv"), "time_s,value\n0.0,1\n0.001,x\n");
    CHECK_THROWS_AS(load_biosignal(dir.file("b.csv")), ParseError);
  }
}

TEST_CASE("load_schedule reads trial starts") {
  TempDir dir;
  testutil::write_file(dir.file("trials.csv"),
                       "trial_start_s\n10.0\n70.0\n130.0\n");
  const StimSchedule sched = load_schedule(dir.file("trials.csv"));
  CHECK(sched.trial_starts_s == std::vector<double>{10.0, 70.0, 130.0});
  CHECK(sched.shocks_per_trial == 12);

  testutil::write_file(dir.file("bad.csv"), "trial_start_s\n10.0\n5.0\n");
  CHECK_THROWS_AS(load_schedule(dir.file("bad.csv")), FormatError);
  testutil::write_file(dir.file("hdr.csv"), "start\n10.0\n");
  CHECK_THROWS_AS(load_schedule(dir.file("hdr.csv")), FormatError);
}

TEST_CASE("export_pgm writes min-max scaled 16-bit big-endian P5") {
  TempDir dir;
  ExportMatrix m(2, 2);
  m << 0, 1, 2, 3;
  export_pgm(m, dir.file("map.pgm"));
  const std::string bytes = testutil::read_file(dir.file("map.pgm"));
  const std::string expected =
      std::string("P5\n2 2\n65535\n") +
      std::string({'\x00', '\x00', '\x55', '\x55', '\xAA', '\xAA', '\xFF',
                   '\xFF'});
  CHECK(bytes == expected);
}

TEST_CASE("export_pgm degenerate ranges map to zero") {
  TempDir dir;
  ExportMatrix constant(1, 2);
  constant << 5, 5;
  export_pgm(constant, dir.file("c.pgm"));
  CHECK(testutil::read_file(dir.file("c.pgm")) ==
        std::string("P5\n2 1\n65535\n") + std::string({'\x00', '\x00', '\x00',
                                                       '\x00'}));

  ExportMatrix single(1, 1);
  single << 42;
  export_pgm(single, dir.file("s.pgm"));
  CHECK(testutil::read_file(dir.file("s.pgm")) ==
        std::string("P5\n1 1\n65535\n") + std::string({'\x00', '\x00'}));
}

TEST_CASE("export_pgm rejects non-finite input") {
  TempDir dir;
  ExportMatrix m(1, 1);
  m << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(export_pgm(m, dir.file("n.pgm")), std::invalid_argument);
}

TEST_CASE("csv exports carry at least 9 significant digits") {
  TempDir dir;
  export_csv_series({1.5, 2.5}, dir.file("s.csv"));
  CHECK(testutil::read_file(dir.file("s.csv")) == "value\n1.5\n2.5\n");

  export_csv_series({}, dir.file("empty.csv"));
  CHECK(testutil::read_file(dir.file("empty.csv")) == "value\n");

  export_csv_pairs({{0.1, 0.2}}, dir.file("p.csv"));
  CHECK(testutil::read_file(dir.file("p.csv")) == "x,y\n0.1,0.2\n");

  export_csv_series({1.0 / 3.0}, dir.file("third.csv"));
  CHECK(testutil::read_file(dir.file("third.csv")) == "value\n0.333333333\n");
}

TEST_CASE("csv exports reject unwritable destinations") {
  CHECK_THROWS_AS(export_csv_series({1.0}, ""), IoError);
  CHECK_THROWS_AS(export_csv_pairs({{1.0, 2.0}}, ""), IoError);
}
