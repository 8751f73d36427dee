#pragma once

#include <ostream>
#include <string>

#include "selfcrowd/selftrain.hpp"

namespace selfcrowd {

// Column orders are fixed; floats use shortest round-trip decimals so equal
// runs produce byte-identical files. Labels are printed 1-based.
//
// history.csv
//   iteration,test_accuracy,r_pseudo,r_combined,cumulative_pseudo_total,
//   final_train_loss,pseudo_count_1,...,pseudo_count_C
//   (r_pseudo is empty at iteration 0; r_combined is empty with no annotations)
//
// selections.csv
//   iteration,instance,worker,label,entropy,strategy
//
// sweep.csv
//   removal_fraction,method,mean_accuracy,std_accuracy,runs_ok,errors

void write_history_csv(std::ostream& out, const RunHistory& history, int num_classes);
void write_selections_csv(std::ostream& out, const RunHistory& history);
void write_sweep_csv(std::ostream& out, const SweepResult& sweep);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(const std::string& s);

}  // namespace selfcrowd
