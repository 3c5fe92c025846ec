#include "rplids/prequential.hpp"

#include "rplids/csv.hpp"

namespace rplids {

void PrequentialLog::write_csv(const std::string& path) const {
    auto out = csv::open_output(path);
    out << "step,truth,prediction,cumulative_acc,cumulative_f1,cumulative_kappa,cumulative_fpr,"
           "cumulative_fnr,moving_acc,moving_f1,moving_kappa,drift_events\n";
    for (const auto& r : steps) {
        out << r.step << ',' << r.truth.name() << ',' << r.prediction.name() << ','
            << csv::format_double(r.cumulative.accuracy) << ',' << csv::format_double(r.cumulative.f1) << ','
            << csv::format_double(r.cumulative.kappa) << ',' << csv::format_double(r.cumulative.fpr) << ','
            << csv::format_double(r.cumulative.fnr) << ',' << csv::format_double(r.moving.accuracy) << ','
            << csv::format_double(r.moving.f1) << ',' << csv::format_double(r.moving.kappa) << ',' << r.events
            << '\n';
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace rplids
