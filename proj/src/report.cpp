#include "selfcrowd/report.hpp"

#include "selfcrowd/text_util.hpp"

namespace selfcrowd {

namespace {

std::string optional_number(const std::optional<double>& v) {
  return v ? text::format_double(*v) : std::string();
}

}  // namespace

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

void write_history_csv(std::ostream& out, const RunHistory& history, int num_classes) {
  out << "iteration,test_accuracy,r_pseudo,r_combined,cumulative_pseudo_total,final_train_loss";
  for (int c = 1; c <= num_classes; ++c) out << ",pseudo_count_" << c;
  out << '\n';
  for (const auto& r : history.records) {
    out << r.iteration << ',' << text::format_double(r.test_accuracy) << ',' << optional_number(r.r_pseudo) << ','
        << optional_number(r.r_combined) << ',' << r.cumulative_pseudo_total << ','
        << text::format_double(r.final_train_loss);
    for (int c = 0; c < num_classes; ++c) {
      out << ',' << (static_cast<std::size_t>(c) < r.pseudo_counts.size() ? r.pseudo_counts[static_cast<std::size_t>(c)] : 0);
    }
    out << '\n';
  }
}

void write_selections_csv(std::ostream& out, const RunHistory& history) {
  out << "iteration,instance,worker,label,entropy,strategy\n";
  for (const auto& it : history.selections) {
    const auto name = strategy_name(it.result.strategy);
    for (const auto& s : it.result.chosen) {
      out << it.iteration << ',' << s.instance << ',' << s.worker << ',' << s.label + 1 << ','
          << text::format_double(s.entropy) << ',' << name << '\n';
    }
  }
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
  out << "removal_fraction,method,mean_accuracy,std_accuracy,runs_ok,errors\n";
  for (const auto& r : sweep.rows) {
    out << text::format_double(r.removal_fraction) << ',' << r.method << ','
        << (r.runs_ok > 0 ? text::format_double(r.mean_accuracy) : std::string()) << ','
        << (r.runs_ok > 0 ? text::format_double(r.std_accuracy) : std::string()) << ',' << r.runs_ok << ','
        << csv_field(r.errors) << '\n';
  }
}

}  // namespace selfcrowd
