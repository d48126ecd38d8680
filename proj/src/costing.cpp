#include "costing.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "error.hpp"
#include "util.hpp"

namespace thumbtruth {

using nlohmann::json;

std::string format_money(Money m) {
  auto v = m.micros < 0 ? -m.micros : m.micros;
  return fmt::format("{}{}.{:06d}", m.micros < 0 ? "-" : "", v / 1'000'000, v % 1'000'000);
}

std::int64_t parse_nanos(std::string_view text) {
  auto s = trim(text);
  if (s.empty()) throw Error(ErrorCode::InvalidArgument, "empty price");
  std::size_t i = 0;
  if (s[0] == '-') throw Error(ErrorCode::InvalidArgument, "negative price " + s);
  if (s[0] == '+') ++i;
  std::int64_t whole = 0;
  bool digits = false;
  for (; i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])); ++i) {
    whole = whole * 10 + (s[i] - '0');
    digits = true;
  }
  std::int64_t frac = 0;
  int frac_digits = 0;
  if (i < s.size() && s[i] == '.') {
    ++i;
    for (; i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])); ++i) {
      if (frac_digits == 9) {
        if (s[i] != '0') throw Error(ErrorCode::InvalidArgument, "price below 1e-9: " + s);
        continue;
      }
      frac = frac * 10 + (s[i] - '0');
      ++frac_digits;
      digits = true;
    }
  }
  if (!digits || i != s.size()) throw Error(ErrorCode::InvalidArgument, "not a decimal price: " + s);
  while (frac_digits < 9) {
    frac *= 10;
    ++frac_digits;
  }
  return whole * 1'000'000'000 + frac;
}

namespace {

std::int64_t price_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return 0;
  if (it->is_string()) return parse_nanos(it->get<std::string>());
  if (it->is_number()) {
    double v = it->get<double>();
    if (v < 0) throw Error(ErrorCode::InvalidArgument, std::string(key) + " is negative");
    return parse_nanos(fmt::format("{:.9f}", v));
  }
  throw Error(ErrorCode::InvalidArgument, std::string(key) + " must be a decimal string or number");
}

}  // namespace

PriceTable PriceTable::from_json(const json& j) {
  PriceTable t;
  t.version = j.value("version", std::string());
  t.effective_date = j.value("effective_date", std::string());
  for (const auto& [name, p] : j.at("backends").items()) {
    BackendPrices b;
    b.input_per_1k_nanos = price_field(p, "input_price_per_1k_tokens");
    b.output_per_1k_nanos = price_field(p, "output_price_per_1k_tokens");
    b.per_image_nanos = price_field(p, "image_price_per_image");
    b.per_media_minute_nanos = price_field(p, "media_price_per_minute");
    b.flat_per_call_nanos = price_field(p, "flat_per_call");
    t.backends.emplace(name, b);
  }
  return t;
}

PriceTable PriceTable::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigurationError, path.string() + ": " + e.what());
  }
}

__int128 price_units(const TokenUsage& u, const BackendPrices& p) {
  using i128 = __int128;
  auto media_millis = static_cast<std::int64_t>(std::llround(u.media_seconds * 1000.0));
  return i128(u.input_tokens) * p.input_per_1k_nanos * 60 +
         i128(u.output_tokens) * p.output_per_1k_nanos * 60 +
         i128(u.image_count) * p.per_image_nanos * 60'000 + i128(media_millis) * p.per_media_minute_nanos +
         i128(p.flat_per_call_nanos) * 60'000;
}

Money price(const TokenUsage& usage, std::string_view backend, const PriceTable& table) {
  auto it = table.backends.find(std::string(backend));
  if (it == table.backends.end()) throw Error(ErrorCode::UnknownBackend, std::string(backend));
  auto units = price_units(usage, it->second);
  auto micros = (units + kUnitsPerMicro / 2) / kUnitsPerMicro;
  return Money{static_cast<std::int64_t>(micros)};
}

std::string_view stage_token(CostStage s) {
  switch (s) {
    case CostStage::Describe: return "describe";
    case CostStage::ThumbDescribe: return "thumb_describe";
    case CostStage::Explain: return "explain";
    case CostStage::Classify: return "classify";
  }
  return "classify";
}

std::optional<CostStage> parse_stage(std::string_view token) {
  for (auto s : kAllStages) {
    if (stage_token(s) == token) return s;
  }
  return std::nullopt;
}

CostLedger::CostLedger(const CostLedger& other) : entries_(other.entries()) {}

CostLedger& CostLedger::operator=(const CostLedger& other) {
  if (this != &other) {
    auto copy = other.entries();
    std::lock_guard lk(m_);
    entries_ = std::move(copy);
  }
  return *this;
}

void CostLedger::accumulate(LedgerEntry entry) {
  std::lock_guard lk(m_);
  entries_.push_back(std::move(entry));
}

void CostLedger::record(CostStage stage, const std::string& backend, const std::string& video_id,
                        const TokenUsage& usage, const PriceTable& table) {
  accumulate(LedgerEntry{stage, backend, video_id, usage, price(usage, backend, table)});
}

std::vector<LedgerEntry> CostLedger::entries() const {
  std::lock_guard lk(m_);
  return entries_;
}

std::map<CostStage, Money> CostLedger::totals() const {
  std::map<CostStage, Money> t;
  for (const auto& e : entries()) t[e.stage] += e.cost;
  return t;
}

std::map<std::pair<CostStage, std::string>, Money> CostLedger::totals_by_backend() const {
  std::map<std::pair<CostStage, std::string>, Money> t;
  for (const auto& e : entries()) t[{e.stage, e.backend}] += e.cost;
  return t;
}

Money CostLedger::grand_total() const {
  Money total;
  for (const auto& e : entries()) total += e.cost;
  return total;
}

std::string CostLedger::to_csv() const {
  std::string out = "stage,backend,video_id,input_tokens,output_tokens,image_count,media_seconds,cost\n";
  for (const auto& e : entries()) {
    out += fmt::format("{},{},{},{},{},{},{:.3f},{}\n", stage_token(e.stage), e.backend, e.video_id,
                       e.usage.input_tokens, e.usage.output_tokens, e.usage.image_count,
                       e.usage.media_seconds, format_money(e.cost));
  }
  return out;
}

std::string average_money(Money total, std::uint64_t count) {
  if (count == 0) return "n/a";
  auto n = static_cast<std::int64_t>(count);
  // micros / count with half-up rounding
  return format_money(Money{(2 * total.micros + n) / (2 * n)});
}

CostReport cost_report(const CostLedger& ledger) {
  CostReport report;
  auto entries = ledger.entries();
  std::map<CostStage, std::pair<std::uint64_t, Money>> per_stage;
  std::map<std::pair<CostStage, std::string>, std::pair<std::uint64_t, Money>> per_backend;
  for (const auto& e : entries) {
    auto& s = per_stage[e.stage];
    ++s.first;
    s.second += e.cost;
    auto& b = per_backend[{e.stage, e.backend}];
    ++b.first;
    b.second += e.cost;
    report.grand_total += e.cost;
  }
  for (auto stage : kAllStages) {
    auto [count, total] = per_stage[stage];
    report.stages.push_back({stage, "", count, total, average_money(total, count)});
  }
  for (const auto& [key, v] : per_backend) {
    report.by_backend.push_back({key.first, key.second, v.first, v.second, average_money(v.second, v.first)});
  }
  return report;
}

void append_usage_log(const std::filesystem::path& path, CostStage stage, const std::string& backend,
                      const std::string& video_id, const TokenUsage& usage) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot append to " + path.string());
  nlohmann::ordered_json j;
  j["stage"] = stage_token(stage);
  j["backend"] = backend;
  j["video_id"] = video_id;
  j["usage"] = usage_to_json(usage);
  out << j.dump() << '\n';
}

}  // namespace thumbtruth
