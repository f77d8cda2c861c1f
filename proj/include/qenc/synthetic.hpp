#pragma once

// Seeded generator for a churn-like table with the telecom schema: 20 feature
// columns (customerID, 16 categoricals, 3 numerics) plus the Churn target.
// The class split is exact; features are drawn conditionally on the label so
// the target is learnable.

#include "qenc/csv.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace qenc {

struct SyntheticConfig {
  std::size_t rows = 7043;
  std::optional<std::size_t> positives; // default: 1869/7043 of rows
  std::uint64_t seed = 42;

  std::size_t positive_count() const {
    if (positives)
      return *positives;
    return static_cast<std::size_t>(std::llround(static_cast<double>(rows) * 1869.0 / 7043.0));
  }
};

struct SyntheticColumn {
  std::string name;
  std::string kind; // "id", "categorical", "numeric", "target"
  std::vector<std::string> levels;
};

inline const std::vector<SyntheticColumn>& churn_schema() {
  static const std::vector<SyntheticColumn> schema = {
      {"customerID", "id", {}},
      {"gender", "categorical", {"Female", "Male"}},
      {"SeniorCitizen", "categorical", {"0", "1"}},
      {"Partner", "categorical", {"No", "Yes"}},
      {"Dependents", "categorical", {"No", "Yes"}},
      {"tenure", "numeric", {}},
      {"PhoneService", "categorical", {"No", "Yes"}},
      {"MultipleLines", "categorical", {"No", "No phone service", "Yes"}},
      {"InternetService", "categorical", {"DSL", "Fiber optic", "No"}},
      {"OnlineSecurity", "categorical", {"No", "No internet service", "Yes"}},
      {"OnlineBackup", "categorical", {"No", "No internet service", "Yes"}},
      {"DeviceProtection", "categorical", {"No", "No internet service", "Yes"}},
      {"TechSupport", "categorical", {"No", "No internet service", "Yes"}},
      {"StreamingTV", "categorical", {"No", "No internet service", "Yes"}},
      {"StreamingMovies", "categorical", {"No", "No internet service", "Yes"}},
      {"Contract", "categorical", {"Month-to-month", "One year", "Two year"}},
      {"PaperlessBilling", "categorical", {"No", "Yes"}},
      {"PaymentMethod",
       "categorical",
       {"Bank transfer (automatic)", "Credit card (automatic)", "Electronic check", "Mailed check"}},
      {"MonthlyCharges", "numeric", {}},
      {"TotalCharges", "numeric", {}},
      {"Churn", "target", {"No", "Yes"}},
  };
  return schema;
}

namespace detail {

inline std::string format_money(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

} // namespace detail

/// Header + rows of the synthetic table.
inline std::vector<csv::Record> generate_churn(const SyntheticConfig& cfg) {
  const std::size_t n = cfg.rows;
  const std::size_t pos = cfg.positive_count();
  if (pos > n)
    throw ConfigError("synthetic positives (" + std::to_string(pos) + ") exceed rows (" + std::to_string(n) + ")");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto bern = [&](double p) { return u01(rng) < p; };
  auto pick = [&](std::initializer_list<double> weights) {
    double r = u01(rng), acc = 0;
    std::size_t i = 0;
    for (double w : weights) {
      acc += w;
      if (r < acc)
        return i;
      ++i;
    }
    return weights.size() - 1;
  };

  std::vector<bool> churn(n, false);
  {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < pos; ++k)
      churn[idx[k]] = true;
  }

  std::vector<csv::Record> out;
  csv::Record header;
  for (const auto& c : churn_schema())
    header.push_back(c.name);
  out.push_back(header);

  const char* alpha = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  for (std::size_t i = 0; i < n; ++i) {
    const bool y = churn[i];
    csv::Record r;
    char id[16];
    std::snprintf(id, sizeof id, "%04zu-%c%c%c%c%c", (i + 1) % 10000, alpha[rng() % 26], alpha[rng() % 26],
                  alpha[rng() % 26], alpha[rng() % 26], alpha[rng() % 26]);
    r.emplace_back(id);
    r.emplace_back(bern(0.5) ? "Male" : "Female");
    r.emplace_back(bern(y ? 0.25 : 0.13) ? "1" : "0");
    r.emplace_back(bern(y ? 0.36 : 0.53) ? "Yes" : "No");
    r.emplace_back(bern(y ? 0.17 : 0.34) ? "Yes" : "No");

    int tenure = y ? static_cast<int>(std::floor(-std::log(1.0 - u01(rng)) * 16.0)) + 1
                   : static_cast<int>(std::floor(u01(rng) * 72.0)) + 1;
    tenure = std::min(tenure, 72);
    r.push_back(std::to_string(tenure));

    const bool phone = bern(0.9);
    r.emplace_back(phone ? "Yes" : "No");
    const bool multi = phone && bern(0.45);
    r.emplace_back(!phone ? "No phone service" : multi ? "Yes" : "No");

    const std::size_t internet = y ? pick({0.25, 0.69, 0.06}) : pick({0.38, 0.35, 0.27});
    static const char* kInternet[] = {"DSL", "Fiber optic", "No"};
    r.emplace_back(kInternet[internet]);
    int services = 0;
    // security, backup, protection, support: churners buy less of them
    const double protective = y ? 0.2 : 0.45;
    const double streaming = y ? 0.43 : 0.38;
    for (int s = 0; s < 6; ++s) {
      if (internet == 2) {
        r.emplace_back("No internet service");
        continue;
      }
      const bool has = bern(s < 4 ? protective : streaming);
      services += has;
      r.emplace_back(has ? "Yes" : "No");
    }

    static const char* kContract[] = {"Month-to-month", "One year", "Two year"};
    r.emplace_back(kContract[y ? pick({0.88, 0.09, 0.03}) : pick({0.43, 0.25, 0.32})]);
    r.emplace_back(bern(y ? 0.75 : 0.54) ? "Yes" : "No");
    static const char* kPayment[] = {"Bank transfer (automatic)", "Credit card (automatic)", "Electronic check",
                                     "Mailed check"};
    r.emplace_back(kPayment[y ? pick({0.14, 0.13, 0.57, 0.16}) : pick({0.25, 0.25, 0.25, 0.25})]);

    double monthly = 18.0 + (phone ? 2.0 : 0.0) + (multi ? 5.0 : 0.0) +
                     (internet == 1 ? 50.0 : internet == 0 ? 25.0 : 0.0) + 5.0 * services + 2.0 * gauss(rng);
    monthly = std::max(18.25, monthly);
    const double total = std::max(monthly, tenure * monthly * (1.0 + 0.05 * gauss(rng)));
    r.push_back(detail::format_money(monthly));
    r.push_back(detail::format_money(total));
    r.emplace_back(y ? "Yes" : "No");
    out.push_back(std::move(r));
  }
  return out;
}

inline nlohmann::json churn_manifest(const SyntheticConfig& cfg) {
  nlohmann::json cols = nlohmann::json::array();
  std::size_t features = 0;
  for (const auto& c : churn_schema()) {
    cols.push_back({{"name", c.name}, {"kind", c.kind}, {"levels", c.levels}});
    features += c.kind != "target";
  }
  return {{"rows", cfg.rows},
          {"positives", cfg.positive_count()},
          {"negatives", cfg.rows - cfg.positive_count()},
          {"seed", cfg.seed},
          {"target", "Churn"},
          {"feature_columns", features},
          {"columns", cols}};
}

/// Writes `<stem>.csv` and `<stem>.manifest.json`.
inline void write_churn(const std::string& csv_path, const std::string& manifest_path, const SyntheticConfig& cfg) {
  std::string text;
  for (const auto& rec : generate_churn(cfg))
    text += csv::format_record(rec);
  csv::write_file(csv_path, text);
  csv::write_file(manifest_path, churn_manifest(cfg).dump(2) + "\n");
}

} // namespace qenc
