#include "bnmtf/data_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace bnmtf {

namespace {

constexpr int kSchemaVersion = 1;

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return Eigen::MatrixXd(0, 0);
    const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j.at(i).size()) != cols)
            throw std::runtime_error("state file: ragged matrix");
        for (Eigen::Index jj = 0; jj < cols; ++jj)
            m(i, jj) = j.at(i).at(jj).get<double>();
    }
    return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
    return v;
}

nlohmann::json load_checked(const std::string& path, const std::string& expected_type) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    nlohmann::json j;
    in >> j;
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != kSchemaVersion)
        throw std::runtime_error("state file: unsupported schema version in " + path);
    if (j.at("type").get<std::string>() != expected_type)
        throw std::runtime_error("state file: expected type '" + expected_type +
                                 "' in " + path);
    return j;
}

nlohmann::json vb_factor_to_json(const VbFactor& f) {
    return {{"mu", matrix_to_json(f.mu)},
            {"prec", matrix_to_json(f.prec)},
            {"mean", matrix_to_json(f.mean)},
            {"var", matrix_to_json(f.var)},
            {"second", matrix_to_json(f.second)}};
}

VbFactor vb_factor_from_json(const nlohmann::json& j) {
    VbFactor f;
    f.mu = matrix_from_json(j.at("mu"));
    f.prec = matrix_from_json(j.at("prec"));
    f.mean = matrix_from_json(j.at("mean"));
    f.var = matrix_from_json(j.at("var"));
    f.second = matrix_from_json(j.at("second"));
    return f;
}

nlohmann::json vb_gammas_to_json(const std::vector<VbGamma>& qs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& q : qs) arr.push_back({{"shape", q.shape}, {"rate", q.rate}});
    return arr;
}

std::vector<VbGamma> vb_gammas_from_json(const nlohmann::json& j) {
    std::vector<VbGamma> qs;
    for (const auto& e : j)
        qs.push_back({e.at("shape").get<double>(), e.at("rate").get<double>()});
    return qs;
}

void dump(const nlohmann::json& j, const std::string& path) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

}  // namespace

MaskedMatrix load_csv(const std::string& path, const std::string& missing_token,
                      bool has_header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<std::vector<double>> values;
    std::vector<std::vector<bool>> mask;
    std::string line;
    int line_no = 0;
    bool skipped_header = !has_header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!skipped_header) {
            skipped_header = true;
            continue;
        }
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            const std::size_t pos = line.find(',', start);
            if (pos == std::string::npos) {
                cells.push_back(line.substr(start));
                break;
            }
            cells.push_back(line.substr(start, pos - start));
            start = pos + 1;
        }
        std::vector<double> row;
        std::vector<bool> row_mask;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string t = trim(cells[c]);
            if (t == missing_token) {
                row.push_back(0.0);
                row_mask.push_back(false);
                continue;
            }
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
            if (ec != std::errc() || ptr != t.data() + t.size())
                throw std::runtime_error("csv parse error at row " +
                                         std::to_string(line_no) + ", column " +
                                         std::to_string(c + 1) + ": '" + t + "'");
            row.push_back(v);
            row_mask.push_back(true);
        }
        if (!values.empty() && row.size() != values.front().size())
            throw std::runtime_error("csv: ragged row " + std::to_string(line_no));
        if (!row.empty()) {
            values.push_back(std::move(row));
            mask.push_back(std::move(row_mask));
        }
    }
    if (values.empty()) throw std::runtime_error("csv: no data rows in " + path);
    const Eigen::Index rows = static_cast<Eigen::Index>(values.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(values.front().size());
    Eigen::MatrixXd value_mat(rows, cols);
    BoolMatrix mask_mat(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
            value_mat(i, j) = values[i][j];
            mask_mat(i, j) = mask[i][j];
        }
    return MaskedMatrix::from_dense(std::move(value_mat), std::move(mask_mat));
}

void write_csv(const MaskedMatrix& data, const std::string& path,
               const std::string& missing_token) {
    auto out = open_out(path);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.cols(); ++j) {
            if (j > 0) out << ',';
            if (data.observed(i, j)) out << format_double(data.values()(i, j));
            else out << missing_token;
        }
        out << '\n';
    }
}

void write_dense_csv(const Eigen::MatrixXd& matrix, const std::string& path) {
    auto out = open_out(path);
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
            if (j > 0) out << ',';
            out << format_double(matrix(i, j));
        }
        out << '\n';
    }
}

MaskedMatrix preprocess(const MaskedMatrix& data, const PreprocessSpec& spec) {
    if (spec.cap && !(*spec.cap > 0.0))
        throw std::invalid_argument("preprocess: cap must be positive");
    Eigen::MatrixXd values = data.values();
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.cols(); ++j) {
            if (!data.observed(i, j)) continue;
            double v = values(i, j);
            if (spec.undo_natural_log) v = std::exp(v);
            if (spec.cap) v = std::min(*spec.cap, v);
            values(i, j) = v;
        }
    }
    if (!spec.drop_rows_with_fewer_than)
        return MaskedMatrix::from_dense(std::move(values), data.mask());

    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < data.rows(); ++i)
        if (static_cast<int>(data.row_omega(i).size()) >= *spec.drop_rows_with_fewer_than)
            keep.push_back(i);
    if (keep.empty()) throw std::runtime_error("preprocess: row filter removed every row");
    Eigen::MatrixXd kept_values(static_cast<Eigen::Index>(keep.size()), data.cols());
    BoolMatrix kept_mask(static_cast<Eigen::Index>(keep.size()), data.cols());
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(keep.size()); ++r) {
        kept_values.row(r) = values.row(keep[r]);
        for (Eigen::Index j = 0; j < data.cols(); ++j)
            kept_mask(r, j) = data.mask()(keep[r], j);
    }
    return MaskedMatrix::from_dense(std::move(kept_values), std::move(kept_mask));
}

void save_state(const NmfState& state, const std::string& path) {
    nlohmann::json j{{"schema_version", kSchemaVersion},
                     {"type", "nmf"},
                     {"U", matrix_to_json(state.U)},
                     {"V", matrix_to_json(state.V)},
                     {"tau", state.tau}};
    if (state.ard_lambda.size() > 0) j["ard_lambda"] = vector_to_json(state.ard_lambda);
    dump(j, path);
}

void save_state(const NmtfState& state, const std::string& path) {
    nlohmann::json j{{"schema_version", kSchemaVersion},
                     {"type", "nmtf"},
                     {"F", matrix_to_json(state.F)},
                     {"S", matrix_to_json(state.S)},
                     {"G", matrix_to_json(state.G)},
                     {"tau", state.tau}};
    if (state.ard_lambda_f.size() > 0) j["ard_lambda_f"] = vector_to_json(state.ard_lambda_f);
    if (state.ard_lambda_g.size() > 0) j["ard_lambda_g"] = vector_to_json(state.ard_lambda_g);
    dump(j, path);
}

void save_state(const VbNmfState& state, const std::string& path) {
    nlohmann::json j{{"schema_version", kSchemaVersion},
                     {"type", "vb_nmf"},
                     {"U", vb_factor_to_json(state.U)},
                     {"V", vb_factor_to_json(state.V)},
                     {"tau_q", {{"shape", state.tau_q.shape}, {"rate", state.tau_q.rate}}}};
    if (!state.ard_q.empty()) j["ard_q"] = vb_gammas_to_json(state.ard_q);
    dump(j, path);
}

void save_state(const VbNmtfState& state, const std::string& path) {
    nlohmann::json j{{"schema_version", kSchemaVersion},
                     {"type", "vb_nmtf"},
                     {"F", vb_factor_to_json(state.F)},
                     {"S", vb_factor_to_json(state.S)},
                     {"G", vb_factor_to_json(state.G)},
                     {"tau_q", {{"shape", state.tau_q.shape}, {"rate", state.tau_q.rate}}}};
    if (!state.ard_f_q.empty()) j["ard_f_q"] = vb_gammas_to_json(state.ard_f_q);
    if (!state.ard_g_q.empty()) j["ard_g_q"] = vb_gammas_to_json(state.ard_g_q);
    dump(j, path);
}

NmfState load_nmf_state(const std::string& path) {
    const nlohmann::json j = load_checked(path, "nmf");
    NmfState state;
    state.U = matrix_from_json(j.at("U"));
    state.V = matrix_from_json(j.at("V"));
    state.tau = j.at("tau").get<double>();
    if (j.contains("ard_lambda")) state.ard_lambda = vector_from_json(j["ard_lambda"]);
    return state;
}

NmtfState load_nmtf_state(const std::string& path) {
    const nlohmann::json j = load_checked(path, "nmtf");
    NmtfState state;
    state.F = matrix_from_json(j.at("F"));
    state.S = matrix_from_json(j.at("S"));
    state.G = matrix_from_json(j.at("G"));
    state.tau = j.at("tau").get<double>();
    if (j.contains("ard_lambda_f")) state.ard_lambda_f = vector_from_json(j["ard_lambda_f"]);
    if (j.contains("ard_lambda_g")) state.ard_lambda_g = vector_from_json(j["ard_lambda_g"]);
    return state;
}

VbNmfState load_vb_nmf_state(const std::string& path) {
    const nlohmann::json j = load_checked(path, "vb_nmf");
    VbNmfState state;
    state.U = vb_factor_from_json(j.at("U"));
    state.V = vb_factor_from_json(j.at("V"));
    state.tau_q = {j.at("tau_q").at("shape").get<double>(),
                   j.at("tau_q").at("rate").get<double>()};
    if (j.contains("ard_q")) state.ard_q = vb_gammas_from_json(j["ard_q"]);
    return state;
}

VbNmtfState load_vb_nmtf_state(const std::string& path) {
    const nlohmann::json j = load_checked(path, "vb_nmtf");
    VbNmtfState state;
    state.F = vb_factor_from_json(j.at("F"));
    state.S = vb_factor_from_json(j.at("S"));
    state.G = vb_factor_from_json(j.at("G"));
    state.tau_q = {j.at("tau_q").at("shape").get<double>(),
                   j.at("tau_q").at("rate").get<double>()};
    if (j.contains("ard_f_q")) state.ard_f_q = vb_gammas_from_json(j["ard_f_q"]);
    if (j.contains("ard_g_q")) state.ard_g_q = vb_gammas_from_json(j["ard_g_q"]);
    return state;
}

Eigen::MatrixXd load_state_prediction(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    nlohmann::json j;
    in >> j;
    const std::string type = j.at("type").get<std::string>();
    if (type == "nmf") return load_nmf_state(path).predict();
    if (type == "nmtf") return load_nmtf_state(path).predict();
    if (type == "vb_nmf") return load_vb_nmf_state(path).predict();
    if (type == "vb_nmtf") return load_vb_nmtf_state(path).predict();
    throw std::runtime_error("state file: unknown type '" + type + "'");
}

namespace {

std::string optional_int(int v) { return v < 0 ? "" : std::to_string(v); }

std::string optional_double(double v) {
    return std::isnan(v) ? "" : format_double(v);
}

}  // namespace

void write_results(const std::string& path, const ExperimentResult& result,
                   ResultFormat format) {
    if (format == ResultFormat::csv) {
        auto out = open_out(path);
        out << "engine,model,ard,setting,fold,train_mse,test_mse,iterations,"
               "chosen_k,active_factors\n";
        for (const auto& row : result.rows) {
            out << row.engine << ',' << row.model << ',' << (row.ard ? 1 : 0) << ','
                << format_double(row.setting) << ',' << row.fold << ','
                << format_double(row.train_mse) << ',' << optional_double(row.test_mse)
                << ',' << row.iterations << ',' << optional_int(row.chosen_k) << ','
                << optional_int(row.active_factors) << '\n';
        }
        return;
    }
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : result.rows) {
        nlohmann::json r{{"engine", row.engine},   {"model", row.model},
                         {"ard", row.ard},         {"setting", row.setting},
                         {"fold", row.fold},       {"train_mse", row.train_mse},
                         {"iterations", row.iterations}};
        if (!std::isnan(row.test_mse)) r["test_mse"] = row.test_mse;
        if (row.chosen_k >= 0) r["chosen_k"] = row.chosen_k;
        if (row.active_factors >= 0) r["active_factors"] = row.active_factors;
        rows.push_back(std::move(r));
    }
    dump(rows, path);
}

void write_timings(const std::string& path, const ExperimentResult& result) {
    auto out = open_out(path);
    out << "engine,model,ard,setting,fold,seconds\n";
    for (const auto& row : result.rows)
        out << row.engine << ',' << row.model << ',' << (row.ard ? 1 : 0) << ','
            << format_double(row.setting) << ',' << row.fold << ','
            << format_double(row.seconds) << '\n';
}

void write_trace(const std::string& path, const TraceRecord& trace) {
    auto out = open_out(path);
    const bool with_elbo = !trace.elbo.empty();
    out << (with_elbo ? "iteration,seconds,train_mse,elbo\n"
                      : "iteration,seconds,train_mse\n");
    for (std::size_t t = 0; t < trace.train_mse.size(); ++t) {
        out << t << ',' << format_double(trace.seconds[t]) << ','
            << format_double(trace.train_mse[t]);
        if (with_elbo) out << ',' << optional_double(trace.elbo[t]);
        out << '\n';
    }
}

}  // namespace bnmtf
