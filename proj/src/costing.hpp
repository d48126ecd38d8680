#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "providers.hpp"

namespace thumbtruth {

// Currency in whole micro-dollars; every priced entry is rounded here.
struct Money {
  std::int64_t micros = 0;

  Money& operator+=(Money o) {
    micros += o.micros;
    return *this;
  }
  friend Money operator+(Money a, Money b) { return Money{a.micros + b.micros}; }
  auto operator<=>(const Money&) const = default;
};

std::string format_money(Money m);  // "10.500000"
// Exact decimal parse ("0.003", "15", "1e-3" is rejected); up to 9 fraction digits.
std::int64_t parse_nanos(std::string_view decimal);

struct BackendPrices {
  std::int64_t input_per_1k_nanos = 0;
  std::int64_t output_per_1k_nanos = 0;
  std::int64_t per_image_nanos = 0;
  std::int64_t per_media_minute_nanos = 0;
  std::int64_t flat_per_call_nanos = 0;
};

struct PriceTable {
  std::string version;
  std::string effective_date;
  std::map<std::string, BackendPrices> backends;

  // Prices may be JSON strings (exact) or numbers.
  static PriceTable from_json(const nlohmann::json& j);
  static PriceTable load(const std::filesystem::path& path);
};

// Exact cost in units of 1e-9 / 60000 dollars: linear in every usage field.
// media_seconds is taken to the nearest millisecond.
__int128 price_units(const TokenUsage& usage, const BackendPrices& prices);
inline constexpr std::int64_t kUnitsPerMicro = 60'000'000;

// Round half-up to whole micro-dollars. Throws UnknownBackend.
Money price(const TokenUsage& usage, std::string_view backend, const PriceTable& table);

enum class CostStage { Describe, ThumbDescribe, Explain, Classify };
inline constexpr CostStage kAllStages[] = {CostStage::Describe, CostStage::ThumbDescribe,
                                           CostStage::Explain, CostStage::Classify};
std::string_view stage_token(CostStage s);  // describe, thumb_describe, explain, classify
std::optional<CostStage> parse_stage(std::string_view token);

struct LedgerEntry {
  CostStage stage = CostStage::Classify;
  std::string backend;
  std::string video_id;
  TokenUsage usage;
  Money cost;
};

// Appends are serialized; totals are recomputed from entries on demand.
class CostLedger {
 public:
  CostLedger() = default;
  CostLedger(const CostLedger& other);
  CostLedger& operator=(const CostLedger& other);

  void accumulate(LedgerEntry entry);
  // Prices the usage against the table, then accumulates.
  void record(CostStage stage, const std::string& backend, const std::string& video_id,
              const TokenUsage& usage, const PriceTable& table);

  std::vector<LedgerEntry> entries() const;
  std::map<CostStage, Money> totals() const;
  std::map<std::pair<CostStage, std::string>, Money> totals_by_backend() const;
  Money grand_total() const;

  std::string to_csv() const;

 private:
  mutable std::mutex m_;
  std::vector<LedgerEntry> entries_;
};

struct CostRow {
  CostStage stage = CostStage::Classify;
  std::string backend;  // empty for the stage-wide row
  std::uint64_t count = 0;
  Money total;
  std::string average;  // 6 decimals, or "n/a" for an empty stage
};

struct CostReport {
  std::vector<CostRow> stages;       // one per stage, in kAllStages order
  std::vector<CostRow> by_backend;   // per (stage, backend)
  Money grand_total;
};

// Averages are total / count rounded half-up to 6 decimals.
std::string average_money(Money total, std::uint64_t count);
CostReport cost_report(const CostLedger& ledger);

// Usage log written by generation subcommands: one JSON object per line with
// stage, backend, video_id and usage.
void append_usage_log(const std::filesystem::path& path, CostStage stage, const std::string& backend,
                      const std::string& video_id, const TokenUsage& usage);

}  // namespace thumbtruth
