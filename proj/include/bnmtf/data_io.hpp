#pragma once

#include <optional>
#include <string>

#include "bnmtf/experiments.hpp"
#include "bnmtf/masked_matrix.hpp"
#include "bnmtf/model.hpp"

namespace bnmtf {

/// Cells equal to `missing_token` (after trimming, default: empty) are
/// unobserved. Rows must be rectangular; any other unparseable cell is an
/// error naming its 1-based row and column.
MaskedMatrix load_csv(const std::string& path, const std::string& missing_token = "",
                      bool has_header = false);

/// Writes observed cells with 17 significant digits (lossless round-trip);
/// unobserved cells become `missing_token`.
void write_csv(const MaskedMatrix& data, const std::string& path,
               const std::string& missing_token = "");

void write_dense_csv(const Eigen::MatrixXd& matrix, const std::string& path);

/// Transform pipeline applied to observed cells, in order: exponentiate
/// (undoing a natural-log scale), cap at a maximum, then drop rows with too
/// few observed entries.
struct PreprocessSpec {
    bool undo_natural_log = false;
    std::optional<double> cap;
    std::optional<int> drop_rows_with_fewer_than;
};

MaskedMatrix preprocess(const MaskedMatrix& data, const PreprocessSpec& spec);

/// JSON state files carry a schema version and a model tag; loading a file
/// with an unexpected version or tag fails. Finite values round-trip bit for
/// bit.
void save_state(const NmfState& state, const std::string& path);
void save_state(const NmtfState& state, const std::string& path);
void save_state(const VbNmfState& state, const std::string& path);
void save_state(const VbNmtfState& state, const std::string& path);

NmfState load_nmf_state(const std::string& path);
NmtfState load_nmtf_state(const std::string& path);
VbNmfState load_vb_nmf_state(const std::string& path);
VbNmtfState load_vb_nmtf_state(const std::string& path);

/// Reads any saved state and returns its mean prediction.
Eigen::MatrixXd load_state_prediction(const std::string& path);

enum class ResultFormat { csv, json };

/// Deterministic columns of an experiment table (wall times are written by
/// write_timings instead, so rerunning a seeded experiment reproduces this
/// file byte for byte).
void write_results(const std::string& path, const ExperimentResult& result,
                   ResultFormat format);

/// Wall-time column, aligned with the rows of write_results.
void write_timings(const std::string& path, const ExperimentResult& result);

/// CSV with one line per iteration (including iteration 0); the bound column
/// appears when the trace carries one.
void write_trace(const std::string& path, const TraceRecord& trace);

}  // namespace bnmtf
