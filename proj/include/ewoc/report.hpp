#pragma once

// CSV and metadata outputs of a simulation study, and census tables.

#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ewoc/json_io.hpp"
#include "ewoc/simulation.hpp"

namespace ewoc {

/// 12 significant digits.
inline std::string fmt_num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

/// Quote a CSV field when it holds a comma, quote or newline.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline void write_oc_csv(std::ostream& os, const StudyResult& r) {
  os << "cell,true_link,true_mtd,true_rho0,sample_size,scheme";
  for (const auto& [name, value] : oc_fields(OCSet{})) os << ',' << name;
  os << ",completed,failures\n";
  for (const auto& c : r.cells) {
    os << c.cell.index << ',' << csv_field(c.cell.model.label()) << ',' << fmt_num(c.cell.model.true_mtd) << ','
       << fmt_num(c.cell.model.true_rho0) << ',' << c.cell.sample_size << ',' << c.cell.scheme.label();
    for (const auto& [name, value] : oc_fields(c.oc)) os << ',' << (c.completed > 0 ? fmt_num(value) : "NA");
    os << ',' << c.completed << ',' << c.failures << '\n';
  }
}

inline void write_relative_loss_cells_csv(std::ostream& os, const StudyResult& r) {
  os << "cell,continuous_cell,true_link,true_mtd,sample_size,scheme,characteristic,relative_loss,unstable\n";
  for (const auto& cl : relative_losses(r)) {
    const auto& cell = r.cells[cl.cell_index].cell;
    for (const auto& loss : cl.losses)
      os << cl.cell_index << ',' << cl.continuous_cell_index << ',' << csv_field(cell.model.label()) << ','
         << fmt_num(cell.model.true_mtd) << ',' << cell.sample_size << ',' << cell.scheme.label() << ','
         << loss.characteristic << ',' << fmt_num(loss.value) << ',' << (loss.unstable ? 1 : 0) << '\n';
  }
}

inline void write_relative_loss_summary_csv(std::ostream& os, const StudyResult& r) {
  os << "scheme,true_link,characteristic,median,q25,q75,cells,unstable_cells\n";
  for (const auto& row : summarize_relative_losses(r))
    os << row.scheme << ',' << csv_field(row.true_link) << ',' << row.characteristic << ',' << fmt_num(row.quartiles.median)
       << ',' << fmt_num(row.quartiles.q25) << ',' << fmt_num(row.quartiles.q75) << ',' << row.cells << ','
       << row.unstable << '\n';
}

inline nlohmann::json study_metadata(const StudyConfig& s) {
  nlohmann::json rho0 = nlohmann::json::array();
  for (const auto& m : s.true_models) rho0.push_back(m.true_rho0);
  return {{"software", "ewoc"},
          {"version", kSoftwareVersion},
          {"seed", s.seed},
          {"replicates", s.replicates},
          {"backend", to_json(s.trial.backend)},
          {"estimator", to_string(s.trial.mtd_estimator)},
          {"mtd_scale", to_string(s.mtd_scale)},
          {"feasibility", s.trial.feasibility.label()},
          {"true_rho0", rho0},
          {"relative_loss", "(discrete - continuous) / max(|continuous|, 1e-9)"},
          {"random_streams", "philox4x32-10 keyed by seed; counter (draw, cell, replicate)"},
          {"study", to_json(s)}};
}

struct CensusTable {
  CensusKind kind = CensusKind::MtdInterval;
  std::vector<double> mtds;
  std::vector<double> spacings;
  std::vector<std::vector<CensusCell>> cells;  ///< [mtd][spacing]
};

inline CensusTable census_table(CensusKind kind, const std::vector<double>& mtds, const std::vector<double>& spacings,
                                const LinkFunction& link = LinkFunction::logistic(), double true_rho0 = 0.05,
                                double theta = 0.33, const OcParams& params = {}) {
  CensusTable t{kind, mtds, spacings, {}};
  for (double mtd : mtds) {
    const auto model = TrueModel::make(link, mtd, true_rho0, theta, 0.0);
    auto& row = t.cells.emplace_back();
    for (double sp : spacings) row.push_back(optimal_dose_census(DoseScheme::equally_spaced(0.0, 1.0, sp), model, kind, params));
  }
  return t;
}

/// "4.8 (1)"
inline std::string census_label(const CensusCell& c) {
  return format_percentage(c.percentage) + " (" + std::to_string(c.count) + ")";
}

inline std::string spacing_label(double sp) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "D%.2f", sp);
  return buf;
}

inline void write_census_csv(std::ostream& os, const CensusTable& t) {
  os << "true_mtd";
  for (double sp : t.spacings) os << ',' << spacing_label(sp);
  os << '\n';
  for (std::size_t i = 0; i < t.mtds.size(); ++i) {
    os << fmt_num(t.mtds[i]);
    for (const auto& c : t.cells[i]) os << ',' << census_label(c);
    os << '\n';
  }
}

inline void print_census(std::ostream& os, const CensusTable& t, const OcParams& params = {}) {
  char buf[64];
  os << (t.kind == CensusKind::MtdInterval ? "optimal MTD interval" : "optimal toxicity interval") << '\n';
  os << "true MTD  ";
  if (t.kind == CensusKind::MtdInterval) os << "interval       ";
  for (double sp : t.spacings) {
    std::snprintf(buf, sizeof buf, "%12s", spacing_label(sp).c_str());
    os << buf;
  }
  os << '\n';
  for (std::size_t i = 0; i < t.mtds.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-10g", t.mtds[i]);
    os << buf;
    if (t.kind == CensusKind::MtdInterval) {
      const double h = params.mtd_halfwidth_factor * t.mtds[i];
      std::snprintf(buf, sizeof buf, "(%.2f ; %.2f)  ", t.mtds[i] - h, t.mtds[i] + h);
      os << buf;
    }
    for (const auto& c : t.cells[i]) {
      std::snprintf(buf, sizeof buf, "%12s", census_label(c).c_str());
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace ewoc
