#pragma once

#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "glucast/metrics.hpp"

namespace glucast {

// Effective-config key/value pairs echoed into every artifact as '# key value'
// comment lines, so each output records how it was produced.
using KvList = std::vector<std::pair<std::string, std::string>>;

void write_provenance(std::ostream& out, const std::string& artifact, const KvList& kv);

// Machine-readable rows: horizon,minutes,stratum,metric,value,count. Absent
// strata appear only as a count row with value 0.
void write_report_csv(std::ostream& out, const MetricsReport& r, const KvList& provenance);
std::string render_report_text(const MetricsReport& r);

// Combined multi-method table; `failures` carries methods that did not
// produce a report (emitted as comments, not silently dropped).
void write_compare_csv(std::ostream& out, const std::vector<std::string>& methods,
                       const std::vector<MetricsReport>& reports, const KvList& provenance,
                       const std::vector<std::string>& failures);
std::string render_compare_text(const std::vector<std::string>& methods,
                                const std::vector<MetricsReport>& reports,
                                const std::vector<std::string>& failures);

void write_acf_csv(std::ostream& out,
                   const std::vector<std::pair<std::string, AcfResult>>& per_patient,
                   const KvList& provenance);

}  // namespace glucast
