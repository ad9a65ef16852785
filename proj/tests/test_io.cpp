#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "conjulab/io.hpp"
#include "conjulab/rng.hpp"
#include "doctest.h"

using namespace conjulab;
using namespace conjulab::io;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Hand-built IDX pair: 2 images of 3x3 pixels, labels {2, 0}.
std::string idx_images_fixture() {
  std::string b;
  auto be = [&b](std::uint32_t v) {
    b += static_cast<char>(v >> 24);
    b += static_cast<char>((v >> 16) & 0xff);
    b += static_cast<char>((v >> 8) & 0xff);
    b += static_cast<char>(v & 0xff);
  };
  be(0x00000803u);
  be(2);
  be(3);
  be(3);
  for (int p = 0; p < 9; ++p) b += static_cast<char>(p * 10);        // image 0
  for (int p = 0; p < 9; ++p) b += static_cast<char>(255 - p * 10);  // image 1
  return b;
}

std::string idx_labels_fixture() {
  std::string b;
  b += '\x00';
  b += '\x00';
  b += '\x08';
  b += '\x01';
  b += '\x00';
  b += '\x00';
  b += '\x00';
  b += '\x02';  // count 2
  b += '\x02';  // label 2
  b += '\x00';  // label 0
  return b;
}

}  // namespace

TEST_CASE("format_double") {
  CHECK(format_double(std::nan("")) == "NA");
  CHECK(format_double(kInf) == "inf");
  CHECK(format_double(-kInf) == "-inf");
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.5) == "-2.5");

  // Shortest round trip: parsing the string recovers the exact double.
  SplitMix64 rng(3);
  for (int it = 0; it < 1000; ++it) {
    double v = std::ldexp(rng.next_gaussian(), static_cast<int>(
                              rng.next_below(401)) - 200);
    std::string s = format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
}

TEST_CASE("parse_config_text defaults and full key coverage") {
  auto d = parse_config_text("");
  CHECK(d.name == "run");
  CHECK(d.classes == 2);
  CHECK(d.sgd.momentum == doctest::Approx(0.9));
  CHECK(d.sgd.weight_decay == doctest::Approx(5e-4));
  CHECK(d.pearson_window == 4);
  CHECK(d.sgd.cosine_anneal);

  const char* text = R"(# full exercise
[run]
name = demo
dataset = gaussian
classes = 3
dim = 5
samples = 24
data_seed = 9
init_seed = 10
loss = mse
pearson_window = 6
log_every = 2
tracked = 2

[net]
width = 16
depth = 2
skip = true
activation = tanh
norm = layernorm

[sgd]
lr0 = 0.05
momentum = 0.8
weight_decay = 0.001
batch_size = 4
epochs = 12
cosine = false
seed = 13

[sweep]
depths = 1, 2, 4
widths = 8,16
skips = 0,1
seeds = 3,4,5
)";
  auto p = parse_config_text(text);
  CHECK(p.name == "demo");
  CHECK(p.classes == 3);
  CHECK(p.data_dim == 5);
  CHECK(p.samples == 24);
  CHECK(p.data_seed == 9);
  CHECK(p.init_seed == 10);
  CHECK(p.loss == experiments::LossKind::MSE);
  CHECK(p.pearson_window == 6);
  CHECK(p.log_every == 2);
  CHECK(p.tracked == 2);
  CHECK(p.net.width == 16);
  CHECK(p.net.depth_blocks == 2);
  CHECK(p.net.skip);
  CHECK(p.net.activation == net::Activation::Tanh);
  CHECK(p.net.normalization == net::Normalization::LayerNorm);
  CHECK(p.sgd.lr0 == doctest::Approx(0.05));
  CHECK(p.sgd.momentum == doctest::Approx(0.8));
  CHECK(p.sgd.weight_decay == doctest::Approx(0.001));
  CHECK(p.sgd.batch_size == 4);
  CHECK(p.sgd.epochs == 12);
  CHECK_FALSE(p.sgd.cosine_anneal);
  CHECK(p.sgd.seed == 13);
  CHECK(p.sweeps.depths == std::vector<Index>{1, 2, 4});
  CHECK(p.sweeps.widths == std::vector<Index>{8, 16});
  CHECK(p.sweeps.skips == std::vector<int>{0, 1});
  CHECK(p.sweeps.seeds == std::vector<std::uint64_t>{3, 4, 5});
}

TEST_CASE("parse_config_text rejects malformed input") {
  CHECK_THROWS_AS(parse_config_text("[run]\nbogus_key = 1\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("[mystery]\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("name = x\n"), ParseError);  // no section
  CHECK_THROWS_AS(parse_config_text("[run\n"), ParseError);
  CHECK_THROWS_AS(parse_config_text("[run]\njust words\n"), ParseError);
  CHECK_THROWS_AS(parse_config_text("[run]\nclasses = many\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("[run]\nclasses = 1\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("[sgd]\nmomentum = 1.5\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("[sgd]\nbatch_size = 40\n"),
                  ValidationError);  // exceeds default samples=16

  // Error messages carry the offending line number.
  try {
    parse_config_text("[run]\nname = ok\nbogus_key = 1\n");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  CHECK_THROWS_AS(parse_config("/nonexistent/conjulab.conf"), IoError);
}

TEST_CASE("load_idx fixture") {
  const std::string ip = "/tmp/conjulab_test_images.idx";
  const std::string lp = "/tmp/conjulab_test_labels.idx";
  spit(ip, idx_images_fixture());
  spit(lp, idx_labels_fixture());

  auto data = load_idx(ip, lp, 10);
  REQUIRE(data.size() == 2);
  CHECK(data[0].first.size() == 9);
  CHECK(data[0].first[0] == doctest::Approx(0.0));
  CHECK(data[0].first[1] == doctest::Approx(10.0 / 255.0));
  CHECK(data[1].first[0] == doctest::Approx(1.0));
  // Class count 3 comes from the full label payload; labels one-hot.
  CHECK(data[0].second.size() == 3);
  CHECK(data[0].second[2] == doctest::Approx(1.0));
  CHECK(data[1].second[0] == doctest::Approx(1.0));

  // Limit shorter than the file still sees all labels for the class count.
  auto head = load_idx(ip, lp, 1);
  REQUIRE(head.size() == 1);
  CHECK(head[0].second.size() == 3);

  std::string bad_magic = idx_images_fixture();
  bad_magic[3] = '\x07';
  spit(ip + ".bad", bad_magic);
  CHECK_THROWS_AS(load_idx(ip + ".bad", lp, 10), MagicMismatch);

  std::string short_img = idx_images_fixture().substr(0, 20);
  spit(ip + ".trunc", short_img);
  CHECK_THROWS_AS(load_idx(ip + ".trunc", lp, 10), TruncatedFile);

  std::string lab_short = idx_labels_fixture();
  lab_short[7] = '\x03';  // claims 3 labels
  spit(lp + ".mismatch", lab_short);
  CHECK_THROWS_AS(load_idx(ip, lp + ".mismatch", 10), LengthMismatch);

  for (const char* f : {".bad", ".trunc"}) std::remove((ip + f).c_str());
  std::remove((lp + ".mismatch").c_str());
  std::remove(ip.c_str());
  std::remove(lp.c_str());
}

TEST_CASE("emit_csv content, quoting, and determinism") {
  Table t;
  t.header = {"a", "b", "c"};
  t.rows.push_back({"1", "NA", "plain"});
  t.rows.push_back({"2", "with,comma", "with\"quote"});
  const std::string path = "/tmp/conjulab_test_table.csv";
  emit_csv(t, path);
  CHECK(slurp(path) ==
        "a,b,c\n1,NA,plain\n2,\"with,comma\",\"with\"\"quote\"\n");

  emit_csv(t, path);
  std::string again = slurp(path);
  emit_csv(t, path);
  CHECK(slurp(path) == again);

  Table ragged;
  ragged.header = {"a", "b"};
  ragged.rows.push_back({"only"});
  CHECK_THROWS_AS(emit_csv(ragged, path), ShapeError);
  std::remove(path.c_str());
}

TEST_CASE("trace and sweep table schemas") {
  experiments::TraceRow r;
  r.step = 3;
  r.sample = 1;
  r.loss = 0.5;
  r.pearson_std_ub = std::nan("");
  r.sandwich_defined = true;
  Table t = trace_table({r});
  REQUIRE(t.header.size() == 15);
  CHECK(t.header[0] == "step");
  CHECK(t.header[7] == "Ub");
  CHECK(t.header[8] == "Lb");
  CHECK(t.header[10] == "sandwich_defined");
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][0] == "3");
  CHECK(t.rows[0][2] == "0.5");
  CHECK(t.rows[0][10] == "1");
  CHECK(t.rows[0][11] == "NA");

  experiments::SweepRow s;
  s.depth = 4;
  s.width = 64;
  s.skip = 1;
  s.seed = 9;
  s.gap = 2.5;
  Table ts = sweep_table({s});
  REQUIRE(ts.header.size() == 9);
  CHECK(ts.header[0] == "depth");
  CHECK(ts.header[8] == "gap");
  CHECK(ts.rows[0][3] == "9");
  CHECK(ts.rows[0][8] == "2.5");
}

TEST_CASE("emit_svg structure, NA gaps, determinism") {
  Series s1{"risk", {0, 1, 2, 3, 4}, {1.0, 0.8, std::nan(""), 0.5, 0.4}};
  Series s2{"bound", {0, 1, 2, 3, 4}, {2.0, 1.8, 1.6, 1.5, 1.4}};
  const std::string path = "/tmp/conjulab_test_chart.svg";
  emit_svg({s1, s2}, path, "demo chart");
  std::string svg = slurp(path);
  CHECK(svg.rfind("<svg ", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("demo chart") != std::string::npos);
  CHECK(svg.find("risk") != std::string::npos);
  CHECK(svg.find("bound") != std::string::npos);
  CHECK(svg.find("NA") == std::string::npos);  // no NaN leaks into markup

  // The NaN splits the first series into two subpaths (two M commands).
  std::size_t first_path = svg.find("<path d=\"M");
  REQUIRE(first_path != std::string::npos);
  std::size_t path_end = svg.find('"', first_path + 9);
  std::string d = svg.substr(first_path + 9, path_end - first_path - 9);
  CHECK(std::count(d.begin(), d.end(), 'M') == 2);

  emit_svg({s1, s2}, path, "demo chart");
  CHECK(slurp(path) == svg);

  CHECK_THROWS_AS(emit_svg({}, path, "x"), EmptySeries);
  Series allnan{"n", {0, 1}, {std::nan(""), std::nan("")}};
  CHECK_THROWS_AS(emit_svg({allnan}, path, "x"), EmptySeries);
  Series ragged{"r", {0, 1}, {0.5}};
  CHECK_THROWS_AS(emit_svg({ragged}, path, "x"), LengthMismatch);
  std::remove(path.c_str());
}

TEST_CASE("hash_file FNV-1a vectors") {
  const std::string path = "/tmp/conjulab_test_hash.bin";
  spit(path, "abc");
  CHECK(hash_file(path) == "e71fa2190541574b");
  spit(path, "");
  CHECK(hash_file(path) == "cbf29ce484222325");
  std::remove(path.c_str());
  CHECK_THROWS_AS(hash_file("/nonexistent/file.bin"), IoError);
}

TEST_CASE("write_manifest layout") {
  RunManifest m;
  m.run_id = "demo-12345678";
  m.artifact_version = "1";
  m.seeds = {1, 2};
  m.outputs = {{"trace.csv", "deadbeef"}};
  m.config_snapshot = "[run]\nname = demo\n";
  const std::string path = "/tmp/conjulab_test_manifest.txt";
  write_manifest(m, path);
  std::string out = slurp(path);
  CHECK(out.find("run_id: demo-12345678\n") != std::string::npos);
  CHECK(out.find("seeds: 1 2\n") != std::string::npos);
  CHECK(out.find("  trace.csv deadbeef\n") != std::string::npos);
  CHECK(out.find("  name = demo\n") != std::string::npos);
  std::remove(path.c_str());
}
