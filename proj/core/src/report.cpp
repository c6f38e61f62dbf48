#include <fstream>
#include <map>
#include <sstream>

#include "panelvit/error.hpp"
#include "panelvit/keyvalue.hpp"
#include "panelvit/metrics.hpp"

namespace panelvit {

namespace fs = std::filesystem;

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("cannot write " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_scores(const MetricsReport& r) {
  std::ostringstream out;
  out << "accuracy=" << format_double(r.accuracy) << '\n'
      << "recall_macro=" << format_double(r.recall_macro) << '\n'
      << "precision_macro=" << format_double(r.precision_macro) << '\n'
      << "f1_macro=" << format_double(r.f1_macro) << '\n'
      << "cohen_kappa=" << format_double(r.cohen_kappa) << '\n'
      << "mcc=" << format_double(r.mcc) << '\n';
  for (const auto& c : r.per_class) {
    const std::string p = "per_class." + c.name + ".";
    out << p << "precision=" << format_double(c.precision) << '\n'
        << p << "recall=" << format_double(c.recall) << '\n'
        << p << "f1=" << format_double(c.f1) << '\n'
        << p << "support=" << c.support << '\n';
  }
  return out.str();
}

MetricsReport parse_scores(const std::string& text) {
  MetricsReport r;
  std::map<std::string, std::size_t> index;
  for (const auto& [key, value] : parse_key_values(text, "scores")) {
    if (key == "accuracy") r.accuracy = parse_double(value, key);
    else if (key == "recall_macro") r.recall_macro = parse_double(value, key);
    else if (key == "precision_macro") r.precision_macro = parse_double(value, key);
    else if (key == "f1_macro") r.f1_macro = parse_double(value, key);
    else if (key == "cohen_kappa") r.cohen_kappa = parse_double(value, key);
    else if (key == "mcc") r.mcc = parse_double(value, key);
    else if (key.rfind("per_class.", 0) == 0) {
      // per_class.<name>.<field>; the name itself may contain dots.
      const auto dot = key.rfind('.');
      const std::string name = key.substr(10, dot - 10);
      const std::string field = key.substr(dot + 1);
      auto [it, inserted] = index.emplace(name, r.per_class.size());
      if (inserted) r.per_class.push_back({name});
      auto& c = r.per_class[it->second];
      if (field == "precision") c.precision = parse_double(value, key);
      else if (field == "recall") c.recall = parse_double(value, key);
      else if (field == "f1") c.f1 = parse_double(value, key);
      else if (field == "support") c.support = parse_u64(value, key);
      else throw ConfigError("scores: unknown field '" + key + "'");
    } else {
      throw ConfigError("scores: unknown key '" + key + "'");
    }
  }
  return r;
}

std::string format_per_class_csv(const MetricsReport& r) {
  std::ostringstream out;
  out << "class,precision,recall,f1,support\n";
  for (const auto& c : r.per_class) {
    out << c.name << ',' << format_double(c.precision) << ',' << format_double(c.recall) << ','
        << format_double(c.f1) << ',' << c.support << '\n';
  }
  return out.str();
}

std::string format_confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "truth\\predicted";
  for (const auto& n : cm.class_names) out << ',' << n;
  out << '\n';
  for (std::size_t t = 0; t < cm.num_classes; ++t) {
    out << cm.class_names[t];
    for (std::size_t p = 0; p < cm.num_classes; ++p) out << ',' << cm.at(t, p);
    out << '\n';
  }
  return out.str();
}

ConfusionMatrix parse_confusion_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("confusion csv: missing header");
  auto header = split_list(line);
  if (header.empty()) throw DataError("confusion csv: empty header");
  ConfusionMatrix cm;
  cm.class_names.assign(header.begin() + 1, header.end());
  cm.num_classes = cm.class_names.size();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_list(line);
    if (fields.size() != cm.num_classes + 1) throw DataError("confusion csv: ragged row '" + line + "'");
    for (std::size_t p = 0; p < cm.num_classes; ++p) cm.counts.push_back(parse_u64(fields[p + 1], "count"));
  }
  if (cm.counts.size() != cm.num_classes * cm.num_classes) throw DataError("confusion csv: matrix is not square");
  return cm;
}

std::string format_curves_csv(std::span<const EpochRecord> curves) {
  std::ostringstream out;
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& e : curves) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.train_acc) << ','
        << format_double(e.val_loss) << ',' << format_double(e.val_acc) << '\n';
  }
  return out.str();
}

std::vector<EpochRecord> parse_curves_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<EpochRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_list(line);
    if (f.size() != 5) throw DataError("curves csv: expected 5 fields in '" + line + "'");
    out.push_back({parse_size(f[0], "epoch"), parse_double(f[1], "train_loss"), parse_double(f[2], "train_acc"),
                   parse_double(f[3], "val_loss"), parse_double(f[4], "val_acc")});
  }
  return out;
}

ReportPaths render_report(const MetricsReport& report, const ConfusionMatrix& cm, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  ReportPaths paths{dir / "scores.txt", dir / "per_class.csv", dir / "confusion.csv"};
  write_text_file(paths.scores, format_scores(report));
  write_text_file(paths.per_class, format_per_class_csv(report));
  write_text_file(paths.confusion, format_confusion_csv(cm));
  return paths;
}

}  // namespace panelvit
