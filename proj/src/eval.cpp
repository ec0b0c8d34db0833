#include "metaloop/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "metaloop/errors.hpp"

namespace metaloop {
namespace {

using nlohmann::json;

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

std::string to_lower(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(static_cast<char>(std::tolower(c)));
  return out;
}

// Content of the last \boxed{...} in the text, braces balanced.
std::string last_boxed(const std::string& text) {
  static constexpr std::string_view kBoxed = "\\boxed{";
  auto pos = text.rfind(kBoxed);
  if (pos == std::string::npos) return "";
  std::size_t i = pos + kBoxed.size();
  int depth = 1;
  std::string content;
  while (i < text.size() && depth > 0) {
    char c = text[i];
    if (c == '{') ++depth;
    if (c == '}') {
      --depth;
      if (depth == 0) break;
    }
    content.push_back(c);
    ++i;
  }
  return content;
}

// Reads a latex group starting at `i`: either {<balanced>} or a single char.
std::string read_group(const std::string& text, std::size_t& i) {
  if (i >= text.size()) return "";
  if (text[i] != '{') {
    std::string one(1, text[i]);
    ++i;
    return one;
  }
  int depth = 0;
  std::string content;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c == '{') {
      ++depth;
      if (depth == 1) continue;
    }
    if (c == '}') {
      --depth;
      if (depth == 0) {
        ++i;
        break;
      }
    }
    content.push_back(c);
  }
  return content;
}

std::string rewrite_fracs(const std::string& text) {
  static const std::vector<std::string> kFracs = {"\\dfrac", "\\tfrac", "\\frac"};
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    bool matched = false;
    for (const auto& frac : kFracs) {
      if (text.compare(i, frac.size(), frac) == 0) {
        std::size_t j = i + frac.size();
        while (j < text.size() && text[j] == ' ') ++j;
        std::string numerator = read_group(text, j);
        while (j < text.size() && text[j] == ' ') ++j;
        std::string denominator = read_group(text, j);
        out += rewrite_fracs(numerator);
        out += "/";
        out += rewrite_fracs(denominator);
        i = j;
        matched = true;
        break;
      }
    }
    if (!matched) {
      out.push_back(text[i]);
      ++i;
    }
  }
  return out;
}

void erase_all(std::string& text, std::string_view needle) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.erase(pos, needle.size());
  }
}

// Strips commas used as thousands separators (digit,digit).
std::string strip_digit_commas(const std::string& text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == ',' && i > 0 && i + 1 < text.size() &&
        std::isdigit(static_cast<unsigned char>(text[i - 1])) &&
        std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
      continue;
    }
    out.push_back(text[i]);
  }
  return out;
}

struct Rational {
  long long num = 0;
  long long den = 1;
};

bool parse_integer(std::string_view text, long long& out) {
  if (text.empty() || text.size() > 18) return false;
  std::size_t i = 0;
  bool negative = false;
  if (text[0] == '+' || text[0] == '-') {
    negative = text[0] == '-';
    i = 1;
  }
  if (i >= text.size()) return false;
  long long value = 0;
  for (; i < text.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
    value = value * 10 + (text[i] - '0');
  }
  out = negative ? -value : value;
  return true;
}

// Accepts integers, decimals and simple fractions: "-3", "0.5", "1/2", "-7/4".
bool parse_rational(const std::string& text, Rational& out) {
  std::string t = trim(text);
  if (t.empty()) return false;
  auto slash = t.find('/');
  if (slash != std::string::npos) {
    long long num = 0;
    long long den = 0;
    if (!parse_integer(std::string_view(t).substr(0, slash), num)) return false;
    if (!parse_integer(std::string_view(t).substr(slash + 1), den)) return false;
    if (den == 0) return false;
    out = Rational{num, den};
    return true;
  }
  auto dot = t.find('.');
  if (dot != std::string::npos) {
    std::string integral = t.substr(0, dot);
    std::string fractional = t.substr(dot + 1);
    if (fractional.empty() || fractional.size() > 15) return false;
    for (char c : fractional) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    }
    if (integral.empty() || integral == "-" || integral == "+") integral += "0";
    long long whole = 0;
    if (!parse_integer(integral, whole)) return false;
    long long scale = 1;
    for (std::size_t i = 0; i < fractional.size(); ++i) scale *= 10;
    long long frac_digits = 0;
    if (!parse_integer(fractional, frac_digits)) return false;
    bool negative = t[0] == '-';
    long long magnitude = std::llabs(whole) * scale + frac_digits;
    out = Rational{negative ? -magnitude : magnitude, scale};
    return true;
  }
  long long value = 0;
  if (!parse_integer(t, value)) return false;
  out = Rational{value, 1};
  return true;
}

bool rationals_equal(const Rational& a, const Rational& b) {
  return static_cast<__int128>(a.num) * b.den == static_cast<__int128>(b.num) * a.den;
}

bool is_number_shape(const std::string& text) {
  Rational r;
  return parse_rational(text, r);
}

// Last number-shaped token in the text ("" if none).
std::string trailing_number(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> words;
  std::string word;
  while (in >> word) words.push_back(word);
  for (auto it = words.rbegin(); it != words.rend(); ++it) {
    std::string candidate = strip_digit_commas(*it);
    // Trim punctuation edges ("72.", "(42)", "$5,").
    std::size_t lo = 0;
    std::size_t hi = candidate.size();
    auto numeric_char = [](char c) {
      return std::isdigit(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '+' ||
             c == '.' || c == '/';
    };
    while (lo < hi && !numeric_char(candidate[lo])) ++lo;
    while (hi > lo && !std::isdigit(static_cast<unsigned char>(candidate[hi - 1]))) --hi;
    std::string core = candidate.substr(lo, hi - lo);
    if (!core.empty() && is_number_shape(core)) return core;
  }
  return "";
}

std::string strip_outer_punct(const std::string& text) {
  std::size_t lo = 0;
  std::size_t hi = text.size();
  auto droppable = [](char c) {
    return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' || c == '$' ||
           c == ' ';
  };
  while (lo < hi && droppable(text[lo])) ++lo;
  while (hi > lo && droppable(text[hi - 1])) --hi;
  return text.substr(lo, hi - lo);
}

int parse_math_level(const json& value) {
  if (value.is_number_integer()) return value.get<int>();
  if (value.is_string()) {
    std::string text = value.get<std::string>();
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (std::isdigit(static_cast<unsigned char>(text[i]))) {
        return std::stoi(text.substr(i));
      }
    }
  }
  throw ParseError("unreadable MATH level");
}

std::string format_double(double value) {
  char buffer[48];
  std::snprintf(buffer, sizeof(buffer), "%.10g", value);
  return buffer;
}

std::string format_fixed(double value, int decimals) {
  char buffer[48];
  std::snprintf(buffer, sizeof(buffer), "%.*f", decimals, value);
  return buffer;
}

}  // namespace

BenchFormat bench_format_from_string(const std::string& name) {
  std::string lowered = to_lower(trim(name));
  if (lowered == "gsm8k") return BenchFormat::Gsm8k;
  if (lowered == "math") return BenchFormat::Math;
  if (lowered == "aime") return BenchFormat::Aime;
  throw ConfigError("unknown benchmark format '" + name + "' (expected gsm8k, math or aime)");
}

const char* to_string(BenchFormat format) {
  switch (format) {
    case BenchFormat::Gsm8k: return "gsm8k";
    case BenchFormat::Math: return "math";
    case BenchFormat::Aime: return "aime";
  }
  return "gsm8k";
}

std::string normalize_answer(const std::string& text) {
  std::string out = trim(text);
  std::string boxed = last_boxed(out);
  if (!boxed.empty()) out = boxed;
  while (out.size() >= 2 && out.front() == '$' && out.back() == '$') {
    out = trim(out.substr(1, out.size() - 2));
  }
  out = rewrite_fracs(out);
  erase_all(out, "\\left");
  erase_all(out, "\\right");
  erase_all(out, "\\!");
  erase_all(out, "\\,");
  erase_all(out, "\\;");
  erase_all(out, "\\ ");
  erase_all(out, "{");
  erase_all(out, "}");
  erase_all(out, "$");
  out = strip_digit_commas(out);
  out = strip_outer_punct(trim(out));
  return out;
}

std::vector<Sample> load_benchmark(const std::string& path, BenchFormat format,
                                   std::vector<std::string>* issues) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("benchmark: cannot open '" + path + "'");
  }
  std::vector<Sample> samples;
  std::size_t line_number = 0;
  std::size_t malformed = 0;
  std::string line;
  auto report = [&](const std::string& message) {
    ++malformed;
    if (issues) {
      issues->push_back("line " + std::to_string(line_number) + ": " + message);
    }
  };
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& ex) {
      report(std::string("invalid JSON: ") + ex.what());
      continue;
    }
    try {
      Sample sample;
      switch (format) {
        case BenchFormat::Gsm8k: {
          sample.question = record.at("question").get<std::string>();
          std::string answer_text = record.at("answer").get<std::string>();
          auto pos = answer_text.rfind("####");
          if (pos == std::string::npos) {
            throw ParseError("answer has no '####' marker");
          }
          sample.gold_answer = strip_digit_commas(trim(answer_text.substr(pos + 4)));
          sample.id = record.contains("id") ? record.at("id").get<std::string>()
                                            : "gsm8k-" + std::to_string(line_number);
          break;
        }
        case BenchFormat::Math: {
          sample.question = record.contains("problem") ? record.at("problem").get<std::string>()
                                                       : record.at("question").get<std::string>();
          std::string gold;
          if (record.contains("answer")) {
            gold = record.at("answer").get<std::string>();
          } else {
            gold = last_boxed(record.at("solution").get<std::string>());
            if (gold.empty()) {
              throw ParseError("solution has no boxed answer");
            }
          }
          sample.gold_answer = normalize_answer(gold);
          if (record.contains("level")) {
            sample.source_level = parse_math_level(record.at("level"));
          }
          if (record.contains("unique_id")) {
            sample.id = record.at("unique_id").get<std::string>();
          } else if (record.contains("id")) {
            sample.id = record.at("id").get<std::string>();
          } else {
            sample.id = "math-" + std::to_string(line_number);
          }
          break;
        }
        case BenchFormat::Aime: {
          sample.question = record.contains("problem") ? record.at("problem").get<std::string>()
                                                       : record.at("question").get<std::string>();
          long long value = 0;
          const auto& answer = record.at("answer");
          if (answer.is_number_integer()) {
            value = answer.get<long long>();
          } else if (!parse_integer(answer.get<std::string>(), value)) {
            throw ParseError("answer is not an integer");
          }
          if (value < 0 || value > 999) {
            throw ParseError("answer out of the [0, 999] range");
          }
          sample.gold_answer = std::to_string(value);
          sample.id = record.contains("id") ? record.at("id").get<std::string>()
                                            : "aime-" + std::to_string(line_number);
          break;
        }
      }
      if (sample.gold_answer.empty()) {
        throw ParseError("empty gold answer");
      }
      samples.push_back(std::move(sample));
    } catch (const json::exception& ex) {
      report(std::string("bad record: ") + ex.what());
    } catch (const ParseError& ex) {
      report(ex.what());
    }
  }
  if (samples.empty()) {
    throw ParseError("benchmark '" + path + "': no valid records (" +
                     std::to_string(malformed) + " malformed)");
  }
  return samples;
}

bool match_answer(const std::string& predicted, const std::string& gold, BenchFormat) {
  if (trim(predicted).empty()) return false;
  std::string gold_norm = normalize_answer(gold);

  std::string candidate;
  if (predicted.find("\\boxed{") != std::string::npos) {
    candidate = normalize_answer(predicted);
  } else {
    candidate = trailing_number(predicted);
    if (candidate.empty()) {
      candidate = normalize_answer(predicted);
    }
  }

  Rational lhs;
  Rational rhs;
  if (parse_rational(candidate, lhs) && parse_rational(gold_norm, rhs)) {
    return rationals_equal(lhs, rhs);
  }
  auto squeeze = [](const std::string& text) {
    std::string out;
    for (unsigned char c : text) {
      if (!std::isspace(c)) out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
  };
  return !gold_norm.empty() && squeeze(candidate) == squeeze(gold_norm);
}

double rse(double accuracy, double mean_tokens, double l_max) {
  if (l_max <= 0.0) {
    throw ConfigError("l_max must be > 0");
  }
  return accuracy / std::sqrt(1.0 + mean_tokens / l_max);
}

RunReport summarize(const std::string& method, const std::string& dataset,
                    std::vector<SampleResult> samples, double l_max) {
  RunReport report;
  report.method = method;
  report.dataset = dataset;
  report.samples = std::move(samples);
  std::size_t correct = 0;
  double object_sum = 0.0;
  double meta_sum = 0.0;
  for (const auto& sample : report.samples) {
    if (sample.aborted) {
      ++report.aborted;
      continue;
    }
    ++report.completed;
    if (sample.correct) ++correct;
    object_sum += static_cast<double>(sample.object_tokens);
    meta_sum += static_cast<double>(sample.meta_tokens);
  }
  std::size_t total = report.samples.size();
  report.accuracy = total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
  if (report.completed > 0) {
    report.mean_object_tokens = object_sum / static_cast<double>(report.completed);
    report.mean_meta_tokens = meta_sum / static_cast<double>(report.completed);
  }
  report.rse_value = rse(report.accuracy, report.mean_object_tokens, l_max);
  return report;
}

AggregateRow to_aggregate_row(const RunReport& report) {
  return AggregateRow{report.method, report.dataset, report.accuracy, report.mean_object_tokens,
                      report.rse_value};
}

ReportTables render_report(const std::vector<AggregateRow>& rows) {
  if (rows.empty()) {
    throw Error("render_report: no rows");
  }
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  for (const auto& row : rows) {
    if (std::find(methods.begin(), methods.end(), row.method) == methods.end()) {
      methods.push_back(row.method);
    }
    if (std::find(datasets.begin(), datasets.end(), row.dataset) == datasets.end()) {
      datasets.push_back(row.dataset);
    }
  }
  auto find_row = [&](const std::string& method, const std::string& dataset) -> const AggregateRow* {
    for (const auto& row : rows) {
      if (row.method == method && row.dataset == dataset) return &row;
    }
    return nullptr;
  };

  std::size_t method_width = std::string("Method").size();
  for (const auto& method : methods) method_width = std::max(method_width, method.size());

  constexpr int kCell = 8;
  std::ostringstream table;
  table << std::string(method_width, ' ') << " ";
  auto group_header = [&](const std::string& name) {
    std::string cell = "| " + name;
    cell.resize(3 * kCell + 2, ' ');
    table << cell;
  };
  for (const auto& dataset : datasets) group_header(dataset);
  group_header("Avg.");
  table << "\n";

  auto pad_left = [](const std::string& text, std::size_t width) {
    return text.size() >= width ? text : std::string(width - text.size(), ' ') + text;
  };

  std::string method_label = "Method";
  method_label.resize(method_width, ' ');
  table << method_label << " ";
  for (std::size_t g = 0; g < datasets.size() + 1; ++g) {
    table << "|" << pad_left("Acc", kCell) << pad_left("Tokens", kCell) << pad_left("RSE", kCell)
          << " ";
  }
  table << "\n";

  std::ostringstream csv;
  csv << "method,dataset,acc,tokens,rse\n";

  for (const auto& method : methods) {
    std::string label = method;
    label.resize(method_width, ' ');
    table << label << " ";
    double acc_sum = 0.0;
    double tokens_sum = 0.0;
    double rse_sum = 0.0;
    std::size_t present = 0;
    for (const auto& dataset : datasets) {
      const AggregateRow* row = find_row(method, dataset);
      if (row == nullptr) {
        table << "|" << pad_left("-", kCell) << pad_left("-", kCell) << pad_left("-", kCell) << " ";
        continue;
      }
      ++present;
      acc_sum += row->acc;
      tokens_sum += row->tokens;
      rse_sum += row->rse_value;
      table << "|" << pad_left(format_fixed(row->acc, 1), kCell)
            << pad_left(format_fixed(row->tokens, 0), kCell)
            << pad_left(format_fixed(row->rse_value, 1), kCell) << " ";
      csv << method << "," << dataset << "," << format_double(row->acc) << ","
          << format_double(row->tokens) << "," << format_double(row->rse_value) << "\n";
    }
    double n = present == 0 ? 1.0 : static_cast<double>(present);
    table << "|" << pad_left(format_fixed(acc_sum / n, 1), kCell)
          << pad_left(format_fixed(tokens_sum / n, 0), kCell)
          << pad_left(format_fixed(rse_sum / n, 1), kCell) << " \n";
    csv << method << ",avg," << format_double(acc_sum / n) << "," << format_double(tokens_sum / n)
        << "," << format_double(rse_sum / n) << "\n";
  }
  return ReportTables{table.str(), csv.str()};
}

Difficulty tier_from_level(int level) {
  if (level <= 2) return Difficulty::Easy;
  if (level == 3) return Difficulty::Medium;
  return Difficulty::Hard;
}

std::string ConfusionSummary::csv() const {
  std::ostringstream out;
  out << "gold,predicted_easy,predicted_medium,predicted_hard\n";
  const char* names[3] = {"easy", "medium", "hard"};
  for (int g = 0; g < 3; ++g) {
    out << names[g];
    for (int p = 0; p < 3; ++p) {
      out << "," << matrix[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)];
    }
    out << "\n";
  }
  return out.str();
}

ConfusionSummary difficulty_probe(const std::vector<Sample>& samples, MetaBackend& meta,
                                  const std::string& exemplars, const SamplingParams& params) {
  ConfusionSummary summary;
  for (const auto& sample : samples) {
    if (!sample.source_level.has_value()) continue;
    Difficulty gold = tier_from_level(*sample.source_level);
    try {
      Difficulty predicted = assess_difficulty(sample.question, meta, exemplars, params);
      ++summary.matrix[static_cast<std::size_t>(gold)][static_cast<std::size_t>(predicted)];
    } catch (const Error&) {
      ++summary.probe_errors;
    }
  }
  return summary;
}

}  // namespace metaloop
