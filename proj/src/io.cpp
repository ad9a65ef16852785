#include "conjulab/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace conjulab::io {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            int line) {
  throw ValidationError("bad value '" + value + "' for key '" + key +
                        "' at line " + std::to_string(line));
}

long long to_ll(const std::string& key, const std::string& v, int line) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, line);
  return out;
}

double to_dbl(const std::string& key, const std::string& v, int line) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, line);
  return out;
}

bool to_bool(const std::string& key, const std::string& v, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, line);
}

void atomic_write(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw IoError("rename failed for " + path);
  }
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

experiments::ExperimentPlan parse_config_text(const std::string& text) {
  experiments::ExperimentPlan plan;
  // Protocol defaults already sit in the structs (momentum 0.9, weight decay
  // 5e-4, pearson window 4); the parser only overrides what the file names.
  std::stringstream ss(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(ss, raw)) {
    ++line;
    std::string s = raw;
    std::size_t hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') {
        throw ParseError("unterminated section at line " + std::to_string(line));
      }
      section = s.substr(1, s.size() - 2);
      if (section != "run" && section != "net" && section != "sgd" &&
          section != "sweep") {
        throw ValidationError("unknown section [" + section + "] at line " +
                              std::to_string(line));
      }
      continue;
    }
    std::size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected key = value at line " + std::to_string(line));
    }
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty() || section.empty()) {
      throw ParseError("key outside a section at line " + std::to_string(line));
    }
    std::string qual = section + "." + key;

    if (qual == "run.name") {
      plan.name = value;
    } else if (qual == "run.dataset") {
      plan.dataset = value;
    } else if (qual == "run.classes") {
      plan.classes = to_ll(qual, value, line);
    } else if (qual == "run.dim") {
      plan.data_dim = to_ll(qual, value, line);
    } else if (qual == "run.samples") {
      plan.samples = to_ll(qual, value, line);
    } else if (qual == "run.data_seed") {
      plan.data_seed = to_ll(qual, value, line);
    } else if (qual == "run.init_seed") {
      plan.init_seed = to_ll(qual, value, line);
    } else if (qual == "run.loss") {
      if (value == "ce") {
        plan.loss = experiments::LossKind::SoftmaxCE;
      } else if (value == "mse") {
        plan.loss = experiments::LossKind::MSE;
      } else {
        bad_value(qual, value, line);
      }
    } else if (qual == "run.pearson_window") {
      plan.pearson_window = to_ll(qual, value, line);
    } else if (qual == "run.log_every") {
      plan.log_every = to_ll(qual, value, line);
    } else if (qual == "run.tracked") {
      plan.tracked = to_ll(qual, value, line);
    } else if (qual == "run.idx_images") {
      plan.idx_images = value;
    } else if (qual == "run.idx_labels") {
      plan.idx_labels = value;
    } else if (qual == "net.width") {
      plan.net.width = to_ll(qual, value, line);
    } else if (qual == "net.depth") {
      plan.net.depth_blocks = to_ll(qual, value, line);
    } else if (qual == "net.skip") {
      plan.net.skip = to_bool(qual, value, line);
    } else if (qual == "net.activation") {
      if (value == "relu") {
        plan.net.activation = net::Activation::ReLU;
      } else if (value == "tanh") {
        plan.net.activation = net::Activation::Tanh;
      } else if (value == "identity") {
        plan.net.activation = net::Activation::Identity;
      } else {
        bad_value(qual, value, line);
      }
    } else if (qual == "net.norm") {
      if (value == "none") {
        plan.net.normalization = net::Normalization::None;
      } else if (value == "layernorm") {
        plan.net.normalization = net::Normalization::LayerNorm;
      } else {
        bad_value(qual, value, line);
      }
    } else if (qual == "sgd.lr0") {
      plan.sgd.lr0 = to_dbl(qual, value, line);
    } else if (qual == "sgd.momentum") {
      plan.sgd.momentum = to_dbl(qual, value, line);
    } else if (qual == "sgd.weight_decay") {
      plan.sgd.weight_decay = to_dbl(qual, value, line);
    } else if (qual == "sgd.batch_size") {
      plan.sgd.batch_size = to_ll(qual, value, line);
    } else if (qual == "sgd.epochs") {
      plan.sgd.epochs = to_ll(qual, value, line);
    } else if (qual == "sgd.cosine") {
      plan.sgd.cosine_anneal = to_bool(qual, value, line);
    } else if (qual == "sgd.seed") {
      plan.sgd.seed = to_ll(qual, value, line);
    } else if (qual == "sweep.depths") {
      for (const auto& v : split_list(value)) {
        plan.sweeps.depths.push_back(to_ll(qual, v, line));
      }
    } else if (qual == "sweep.widths") {
      for (const auto& v : split_list(value)) {
        plan.sweeps.widths.push_back(to_ll(qual, v, line));
      }
    } else if (qual == "sweep.skips") {
      for (const auto& v : split_list(value)) {
        plan.sweeps.skips.push_back(static_cast<int>(to_ll(qual, v, line)));
      }
    } else if (qual == "sweep.seeds") {
      for (const auto& v : split_list(value)) {
        plan.sweeps.seeds.push_back(to_ll(qual, v, line));
      }
    } else {
      throw ValidationError("unknown key '" + key + "' in section [" + section +
                            "] at line " + std::to_string(line));
    }
  }

  if (plan.classes < 2) throw ValidationError("run.classes must be >= 2");
  if (plan.samples < 1) throw ValidationError("run.samples must be >= 1");
  if (plan.sgd.lr0 < 0.0) throw ValidationError("sgd.lr0 must be >= 0");
  if (plan.sgd.momentum < 0.0 || plan.sgd.momentum >= 1.0) {
    throw ValidationError("sgd.momentum must be in [0, 1)");
  }
  if (plan.sgd.weight_decay < 0.0) {
    throw ValidationError("sgd.weight_decay must be >= 0");
  }
  if (plan.sgd.batch_size < 1 || plan.sgd.batch_size > plan.samples) {
    throw ValidationError("sgd.batch_size must be in [1, run.samples]");
  }
  if (plan.sgd.epochs < 1) throw ValidationError("sgd.epochs must be >= 1");
  if (plan.pearson_window < 2) {
    throw ValidationError("run.pearson_window must be >= 2");
  }
  if (plan.net.width < 1 || plan.net.depth_blocks < 0) {
    throw ValidationError("net.width/depth out of range");
  }
  return plan;
}

experiments::ExperimentPlan parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint32_t be_u32(const std::string& bytes, std::size_t off,
                     const std::string& path) {
  if (off + 4 > bytes.size()) throw TruncatedFile("truncated IDX file " + path);
  auto b = [&](std::size_t i) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + i]));
  };
  return (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
}

}  // namespace

opt::Dataset load_idx(const std::string& images_path,
                      const std::string& labels_path, Index limit) {
  std::string img = read_file(images_path);
  std::string lab = read_file(labels_path);
  if (be_u32(img, 0, images_path) != 0x00000803u) {
    throw MagicMismatch("bad image magic in " + images_path);
  }
  if (be_u32(lab, 0, labels_path) != 0x00000801u) {
    throw MagicMismatch("bad label magic in " + labels_path);
  }
  const std::uint32_t n_img = be_u32(img, 4, images_path);
  const std::uint32_t rows = be_u32(img, 8, images_path);
  const std::uint32_t cols = be_u32(img, 12, images_path);
  const std::uint32_t n_lab = be_u32(lab, 4, labels_path);
  if (n_img != n_lab) {
    throw LengthMismatch("image/label counts differ in IDX pair");
  }
  const std::size_t pix = static_cast<std::size_t>(rows) * cols;
  if (img.size() < 16 + static_cast<std::size_t>(n_img) * pix) {
    throw TruncatedFile("truncated IDX file " + images_path);
  }
  if (lab.size() < 8 + n_lab) {
    throw TruncatedFile("truncated IDX file " + labels_path);
  }
  // Class count from the full label payload, not just the read prefix.
  int classes = 0;
  for (std::uint32_t i = 0; i < n_lab; ++i) {
    classes = std::max(classes, static_cast<int>(
                                    static_cast<unsigned char>(lab[8 + i])) + 1);
  }
  const Index take = std::min<Index>(limit, n_img);
  opt::Dataset data;
  data.reserve(take);
  for (Index i = 0; i < take; ++i) {
    Vec x(pix);
    for (std::size_t p = 0; p < pix; ++p) {
      x[static_cast<Index>(p)] =
          static_cast<unsigned char>(img[16 + i * pix + p]) / 255.0;
    }
    int label = static_cast<unsigned char>(lab[8 + i]);
    data.emplace_back(std::move(x), Vec(Vec::Unit(classes, label)));
  }
  return data;
}

void emit_csv(const Table& table, const std::string& path) {
  std::string out;
  auto append_row = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      const std::string& c = cells[i];
      if (c.find_first_of(",\"\n") != std::string::npos) {
        out += '"';
        for (char ch : c) {
          if (ch == '"') out += '"';
          out += ch;
        }
        out += '"';
      } else {
        out += c;
      }
    }
    out += '\n';
  };
  append_row(table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) {
      throw ShapeError("emit_csv: ragged row");
    }
    append_row(row);
  }
  atomic_write(path, out);
}

Table trace_table(const std::vector<experiments::TraceRow>& rows) {
  Table t;
  t.header = {"step", "sample", "loss", "std_risk", "grad_norm_sq",
              "log2_lambda_min", "log2_lambda_max", "Ub", "Lb",
              "log2_std_risk", "sandwich_defined", "pearson_std_ub",
              "pearson_std_lb", "pearson_std_ge", "pearson_risk_std"};
  for (const auto& r : rows) {
    t.rows.push_back({std::to_string(r.step), std::to_string(r.sample),
                      format_double(r.loss), format_double(r.std_risk),
                      format_double(r.grad_norm_sq),
                      format_double(r.log2_lambda_min),
                      format_double(r.log2_lambda_max), format_double(r.ub),
                      format_double(r.lb), format_double(r.log2_std_risk),
                      r.sandwich_defined ? "1" : "0",
                      format_double(r.pearson_std_ub),
                      format_double(r.pearson_std_lb),
                      format_double(r.pearson_std_ge),
                      format_double(r.pearson_risk_std)});
  }
  return t;
}

Table sweep_table(const std::vector<experiments::SweepRow>& rows) {
  Table t;
  t.header = {"depth", "width", "skip", "seed", "log2_lambda_min",
              "log2_lambda_max", "log2_frob", "log2_diag_norm", "gap"};
  for (const auto& r : rows) {
    t.rows.push_back({std::to_string(r.depth), std::to_string(r.width),
                      std::to_string(r.skip), std::to_string(r.seed),
                      format_double(r.log2_lambda_min),
                      format_double(r.log2_lambda_max),
                      format_double(r.log2_frob),
                      format_double(r.log2_diag_norm), format_double(r.gap)});
  }
  return t;
}

void emit_svg(const std::vector<Series>& series, const std::string& path,
              const std::string& title) {
  if (series.empty()) throw EmptySeries("emit_svg: no series");
  double x_lo = kInf, x_hi = -kInf, y_lo = kInf, y_hi = -kInf;
  bool any = false;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw LengthMismatch("emit_svg: ragged series");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      any = true;
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
    }
  }
  if (!any) throw EmptySeries("emit_svg: no finite points");
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) y_hi = y_lo + 1.0;

  constexpr double kW = 800, kH = 500, kM = 60;
  auto px = [&](double x) {
    return kM + (x - x_lo) / (x_hi - x_lo) * (kW - 2 * kM);
  };
  auto py = [&](double y) {
    return kH - kM - (y - y_lo) / (y_hi - y_lo) * (kH - 2 * kM);
  };
  static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" "
         "height=\"500\" viewBox=\"0 0 800 500\">\n";
  svg += "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
  svg += "<text x=\"400\" y=\"28\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">" + title + "</text>\n";
  // Axes.
  svg += "<line x1=\"" + format_double(kM) + "\" y1=\"" + format_double(kH - kM) +
         "\" x2=\"" + format_double(kW - kM) + "\" y2=\"" +
         format_double(kH - kM) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + format_double(kM) + "\" y1=\"" + format_double(kM) +
         "\" x2=\"" + format_double(kM) + "\" y2=\"" + format_double(kH - kM) +
         "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    double fx = x_lo + (x_hi - x_lo) * t / 5.0;
    double fy = y_lo + (y_hi - y_lo) * t / 5.0;
    svg += "<text x=\"" + format_double(px(fx)) + "\" y=\"" +
           format_double(kH - kM + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"10\">" + format_double(fx) + "</text>\n";
    svg += "<text x=\"" + format_double(kM - 6) + "\" y=\"" +
           format_double(py(fy) + 3) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"10\">" + format_double(fy) + "</text>\n";
  }
  // Series polylines, broken at NA gaps.
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % 8];
    std::string d;
    bool open = false;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        open = false;
        continue;
      }
      d += open ? "L" : "M";
      d += format_double(px(s.x[i])) + " " + format_double(py(s.y[i])) + " ";
      open = true;
    }
    if (!d.empty()) {
      svg += "<path d=\"" + d + "\" fill=\"none\" stroke=\"" + color +
             "\" stroke-width=\"1.5\"/>\n";
    }
    svg += "<text x=\"" + format_double(kW - kM) + "\" y=\"" +
           format_double(kM + 16.0 * si) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" "
           "fill=\"" + color + "\">" + s.name + "</text>\n";
  }
  svg += "</svg>\n";
  atomic_write(path, svg);
}

std::string hash_file(const std::string& path) {
  std::string bytes = read_file(path);
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  std::string out;
  out += "run_id: " + manifest.run_id + "\n";
  out += "artifact_version: " + manifest.artifact_version + "\n";
  out += "seeds:";
  for (auto s : manifest.seeds) out += " " + std::to_string(s);
  out += "\n";
  out += "outputs:\n";
  for (const auto& [p, h] : manifest.outputs) {
    out += "  " + p + " " + h + "\n";
  }
  out += "config:\n";
  std::stringstream ss(manifest.config_snapshot);
  std::string line;
  while (std::getline(ss, line)) out += "  " + line + "\n";
  atomic_write(path, out);
}

}  // namespace conjulab::io
