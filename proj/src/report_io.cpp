#include "glucast/report_io.hpp"

#include <cstdio>
#include <sstream>

namespace glucast {

namespace {

std::string fmt(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

std::string pad(const std::string& s, size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_left(const std::string& s, size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

void write_cell_rows(std::ostream& out, const std::string& prefix, int h,
                     const CellStats& c, Stratum st) {
  const int minutes = h * 5;
  const std::string base = prefix + std::to_string(h) + "," + std::to_string(minutes) + "," +
                           stratum_label(st) + ",";
  out << base << "count," << c.count << "," << c.count << "\n";
  if (!c.present()) return;
  out << base << "median_ape," << fmt(c.median_ape, 6) << "," << c.count << "\n";
  out << base << "ape_q1," << fmt(c.ape_q1, 6) << "," << c.count << "\n";
  out << base << "ape_q3," << fmt(c.ape_q3, 6) << "," << c.count << "\n";
  out << base << "rmse," << fmt(c.rmse, 4) << "," << c.count << "\n";
  out << base << "rmse_q1," << fmt(c.rmse_q1, 4) << "," << c.count << "\n";
  out << base << "rmse_median," << fmt(c.rmse_median, 4) << "," << c.count << "\n";
  out << base << "rmse_q3," << fmt(c.rmse_q3, 4) << "," << c.count << "\n";
  if (c.excluded > 0) {
    out << base << "ape_excluded," << c.excluded << "," << c.count << "\n";
  }
}

}  // namespace

void write_provenance(std::ostream& out, const std::string& artifact, const KvList& kv) {
  out << "# glucast " << artifact << " v1\n";
  for (const auto& [k, v] : kv) out << "# " << k << " " << v << "\n";
}

void write_report_csv(std::ostream& out, const MetricsReport& r, const KvList& provenance) {
  write_provenance(out, "report", provenance);
  out << "horizon,minutes,stratum,metric,value,count\n";
  for (size_t hi = 0; hi < r.horizons.size(); ++hi) {
    for (int st = 0; st < kNumStrata; ++st) {
      write_cell_rows(out, "", r.horizons[hi], r.cells[hi][st], static_cast<Stratum>(st));
    }
  }
}

std::string render_report_text(const MetricsReport& r) {
  std::ostringstream out;
  for (size_t hi = 0; hi < r.horizons.size(); ++hi) {
    const int h = r.horizons[hi];
    out << "Horizon " << h << " steps (" << h * 5 << " min)\n";
    out << "  " << pad_left("Stratum", 8) << pad("Count", 8) << pad("MedAPE", 9) << pad("Q1", 9)
        << pad("Q3", 9) << pad("RMSE", 9) << pad("RMSEq1", 9) << pad("RMSEmed", 9)
        << pad("RMSEq3", 9) << "\n";
    for (int st = 0; st < kNumStrata; ++st) {
      const CellStats& c = r.cells[hi][st];
      out << "  " << pad_left(stratum_label(static_cast<Stratum>(st)), 8)
          << pad(std::to_string(c.count), 8);
      if (c.present()) {
        out << pad(fmt(c.median_ape, 4), 9) << pad(fmt(c.ape_q1, 4), 9)
            << pad(fmt(c.ape_q3, 4), 9) << pad(fmt(c.rmse, 2), 9) << pad(fmt(c.rmse_q1, 2), 9)
            << pad(fmt(c.rmse_median, 2), 9) << pad(fmt(c.rmse_q3, 2), 9);
      } else {
        for (int k = 0; k < 7; ++k) out << pad("-", 9);
      }
      out << "\n";
    }
    out << "\n";
  }
  return out.str();
}

void write_compare_csv(std::ostream& out, const std::vector<std::string>& methods,
                       const std::vector<MetricsReport>& reports, const KvList& provenance,
                       const std::vector<std::string>& failures) {
  write_provenance(out, "compare", provenance);
  for (const auto& f : failures) out << "# failed " << f << "\n";
  out << "method,horizon,minutes,stratum,metric,value,count\n";
  for (size_t m = 0; m < methods.size(); ++m) {
    const MetricsReport& r = reports[m];
    for (size_t hi = 0; hi < r.horizons.size(); ++hi) {
      for (int st = 0; st < kNumStrata; ++st) {
        write_cell_rows(out, methods[m] + ",", r.horizons[hi], r.cells[hi][st],
                        static_cast<Stratum>(st));
      }
    }
  }
}

std::string render_compare_text(const std::vector<std::string>& methods,
                                const std::vector<MetricsReport>& reports,
                                const std::vector<std::string>& failures) {
  std::ostringstream out;
  if (reports.empty()) {
    for (const auto& f : failures) out << "failed: " << f << "\n";
    return out.str();
  }
  const MetricsReport& first = reports.front();
  for (size_t hi = 0; hi < first.horizons.size(); ++hi) {
    const int h = first.horizons[hi];
    for (int st = 0; st < kNumStrata; ++st) {
      out << "Horizon " << h << " steps (" << h * 5 << " min), stratum "
          << stratum_label(static_cast<Stratum>(st)) << " (n="
          << first.cells[hi][st].count << ")\n";
      out << "  " << pad_left("Method", 14) << pad("MedAPE", 9) << pad("APEq1", 9)
          << pad("APEq3", 9) << pad("RMSE", 9) << "\n";
      for (size_t m = 0; m < methods.size(); ++m) {
        const CellStats& c = reports[m].cells[hi][st];
        out << "  " << pad_left(methods[m], 14);
        if (c.present()) {
          out << pad(fmt(c.median_ape, 4), 9) << pad(fmt(c.ape_q1, 4), 9)
              << pad(fmt(c.ape_q3, 4), 9) << pad(fmt(c.rmse, 2), 9);
        } else {
          for (int k = 0; k < 4; ++k) out << pad("-", 9);
        }
        out << "\n";
      }
      out << "\n";
    }
  }
  for (const auto& f : failures) out << "failed: " << f << "\n";
  return out.str();
}

void write_acf_csv(std::ostream& out,
                   const std::vector<std::pair<std::string, AcfResult>>& per_patient,
                   const KvList& provenance) {
  write_provenance(out, "acf", provenance);
  out << "patient_id,lag,r,band95,band99\n";
  for (const auto& [id, acf] : per_patient) {
    for (size_t lag = 0; lag < acf.r.size(); ++lag) {
      out << id << "," << lag << "," << fmt(acf.r[lag], 6) << "," << fmt(acf.band95, 6) << ","
          << fmt(acf.band99, 6) << "\n";
    }
  }
}

}  // namespace glucast
