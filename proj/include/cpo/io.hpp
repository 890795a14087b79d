#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cpo/estimators.hpp"
#include "cpo/optimizer.hpp"
#include "cpo/outcome_model.hpp"
#include "cpo/policy.hpp"
#include "cpo/simulator.hpp"

namespace cpo {

// Policy file: plain text with hex-float logits, so a load reproduces
// log_prob bit-for-bit within the same build.
void save_policy(const Policy& policy, const std::filesystem::path& path);
Policy load_policy(const std::filesystem::path& path);

void save_outcome_model(const OutcomeModel& model, const std::filesystem::path& path);
OutcomeModel load_outcome_model(const std::filesystem::path& path);

// Line-delimited dataset: a header object carrying vocab and provenance,
// then one {"tokens": [...], "outcome": y} object per sample.
void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

// CSV helpers; every table carries a header row.
std::string value_estimate_csv_header();
std::string value_estimate_csv_row(const ValueEstimate& est);
void save_train_trace(const TrainTrace& trace, const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

std::string format_double(double x);  // shortest round-trip decimal

}  // namespace cpo
