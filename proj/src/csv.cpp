#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "levyms/io.hpp"

namespace levyms {

namespace {

std::ofstream open_for_write(const std::filesystem::path& destination) {
    if (destination.has_parent_path()) std::filesystem::create_directories(destination.parent_path());
    std::ofstream out(destination, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + destination.string());
    return out;
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, const std::filesystem::path& source, long line) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE) {
        throw ParameterError(source.string() + ":" + std::to_string(line) + ": bad numeric cell '" + cell + "'");
    }
    return v;
}

std::string value_columns(const std::string& stem, int dim) {
    std::string header = stem;
    for (int i = 2; i <= dim; ++i) header += "," + stem + "_dim" + std::to_string(i);
    return header;
}

}  // namespace

std::string trajectory_csv_header(int dim) { return "path_id,step,t," + value_columns("value", dim); }

void append_trajectory_rows(std::ostream& out, const Trajectory<double>& traj, long path_id) {
    for (std::size_t k = 0; k < traj.size(); ++k) {
        out << path_id << ',' << k << ',' << format_real(traj.times[k]);
        for (int i = 0; i < traj.dim(); ++i) out << ',' << format_real(traj.states(i, static_cast<Eigen::Index>(k)));
        out << '\n';
    }
}

void emit_trajectory_csv(const Trajectory<double>& traj, long path_id, const std::filesystem::path& destination) {
    traj.validate();
    auto out = open_for_write(destination);
    out << trajectory_csv_header(traj.dim()) << '\n';
    append_trajectory_rows(out, traj, path_id);
    if (!out) throw std::runtime_error("failed writing " + destination.string());
}

void emit_trajectory_csv(const std::vector<Trajectory<double>>& trajs, const std::filesystem::path& destination) {
    if (trajs.empty()) throw ParameterError("emit_trajectory_csv: no trajectories");
    for (const auto& t : trajs) {
        t.validate();
        if (t.dim() != trajs.front().dim()) throw ParameterError("emit_trajectory_csv: mixed dimensions");
    }
    auto out = open_for_write(destination);
    out << trajectory_csv_header(trajs.front().dim()) << '\n';
    for (std::size_t k = 0; k < trajs.size(); ++k) append_trajectory_rows(out, trajs[k], static_cast<long>(k));
    if (!out) throw std::runtime_error("failed writing " + destination.string());
}

std::map<long, Trajectory<double>> parse_trajectory_csv(const std::filesystem::path& source) {
    std::ifstream in(source);
    if (!in) throw ParameterError("cannot read " + source.string());
    std::string line;
    if (!std::getline(in, line)) throw ParameterError(source.string() + ": empty file");
    const auto header = split_row(line);
    if (header.size() < 4 || header[0] != "path_id" || header[1] != "step" || header[2] != "t") {
        throw ParameterError(source.string() + ": not a trajectory CSV");
    }
    const int dim = static_cast<int>(header.size()) - 3;

    std::map<long, std::vector<std::vector<double>>> rows;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_row(line);
        if (static_cast<int>(cells.size()) != dim + 3) {
            throw ParameterError(source.string() + ":" + std::to_string(line_no) + ": wrong column count");
        }
        std::vector<double> values;
        for (const auto& c : cells) values.push_back(parse_cell(c, source, line_no));
        auto& path = rows[static_cast<long>(values[0])];
        if (static_cast<double>(path.size()) != values[1]) {
            throw ParameterError(source.string() + ":" + std::to_string(line_no) + ": steps out of order");
        }
        path.push_back(std::move(values));
    }

    std::map<long, Trajectory<double>> result;
    for (auto& [id, path] : rows) {
        Trajectory<double> traj(dim, path.size());
        for (std::size_t k = 0; k < path.size(); ++k) {
            traj.times.push_back(path[k][2]);
            for (int i = 0; i < dim; ++i) traj.states(i, static_cast<Eigen::Index>(k)) = path[k][3 + i];
        }
        traj.validate();
        result.emplace(id, std::move(traj));
    }
    return result;
}

void emit_noise_log_csv(const Matrix<double>& noise_log, const std::filesystem::path& destination) {
    if (noise_log.size() == 0) throw ParameterError("emit_noise_log_csv: empty log");
    auto out = open_for_write(destination);
    out << "step," << value_columns("dl", static_cast<int>(noise_log.rows())) << '\n';
    for (Eigen::Index n = 0; n < noise_log.cols(); ++n) {
        out << n;
        for (Eigen::Index i = 0; i < noise_log.rows(); ++i) out << ',' << format_real(noise_log(i, n));
        out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + destination.string());
}

Matrix<double> parse_noise_log_csv(const std::filesystem::path& source) {
    std::ifstream in(source);
    if (!in) throw ParameterError("cannot read " + source.string());
    std::string line;
    if (!std::getline(in, line)) throw ParameterError(source.string() + ": empty file");
    const auto header = split_row(line);
    if (header.size() < 2 || header[0] != "step" || header[1] != "dl") {
        throw ParameterError(source.string() + ": not a noise log CSV");
    }
    const auto dim = static_cast<Eigen::Index>(header.size() - 1);
    std::vector<double> flat;
    long line_no = 1;
    Eigen::Index steps = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_row(line);
        if (static_cast<Eigen::Index>(cells.size()) != dim + 1) {
            throw ParameterError(source.string() + ":" + std::to_string(line_no) + ": wrong column count");
        }
        if (parse_cell(cells[0], source, line_no) != static_cast<double>(steps)) {
            throw ParameterError(source.string() + ":" + std::to_string(line_no) + ": steps out of order");
        }
        for (Eigen::Index i = 1; i <= dim; ++i) flat.push_back(parse_cell(cells[i], source, line_no));
        ++steps;
    }
    if (steps == 0) throw ParameterError(source.string() + ": no increments");
    return Eigen::Map<Matrix<double>>(flat.data(), dim, steps);
}

void emit_error_report_csv(const ErrorReport& report, const std::filesystem::path& destination) {
    auto out = open_for_write(destination);
    out << "l,macro_dt,micro_dt,M,K,accepted,E_p,stderr\n";
    for (const auto& r : report.levels) {
        out << r.level << ',' << format_real(r.macro_dt) << ',' << format_real(r.micro_dt) << ',' << r.micro_count << ','
            << r.paths << ',' << r.accepted << ',' << format_real(r.e_p) << ',' << format_real(r.std_error) << '\n';
    }
    if (report.has_slope) {
        out << "# slope=" << format_real(report.slope) << " ci95=" << format_real(report.slope_ci) << '\n';
    }
    for (const auto& [name, value] : report.weak_errors) out << "# weak_" << name << '=' << format_real(value) << '\n';
    if (!out) throw std::runtime_error("failed writing " + destination.string());
}

}  // namespace levyms
