#include "calib/targets.h"
#include "calib/csv.h"
#include "calib/error.h"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

namespace calib
{

namespace
{

void check_aligned(std::span<const double> outputs, const TargetSet& targets)
{
    if (outputs.size() != targets.size()) {
        throw AlignmentError("model produced " + std::to_string(outputs.size()) + " outputs for " +
                             std::to_string(targets.size()) + " targets");
    }
    for (std::size_t k = 0; k < outputs.size(); ++k) {
        if (!std::isfinite(outputs[k])) {
            throw EvaluationError("non-finite model output for target '" + targets[k].name + "'");
        }
    }
}

double log_normal_density(double x, double mean, double sd)
{
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
}

} // namespace

TargetSet::TargetSet(std::vector<Target> targets)
    : m_targets(std::move(targets))
{
    if (m_targets.empty()) {
        throw DomainError("a target set needs at least one target");
    }
    std::set<std::string> seen;
    for (const auto& t : m_targets) {
        if (!(t.sd > 0.0) || !std::isfinite(t.sd)) {
            throw DomainError("target '" + t.name + "' has non-positive sd");
        }
        if (!std::isfinite(t.mean)) {
            throw DomainError("target '" + t.name + "' has non-finite mean");
        }
        if (!seen.insert(t.name).second) {
            throw DomainError("duplicate target name '" + t.name + "'");
        }
    }
}

double gof_total(std::span<const double> outputs, const TargetSet& targets)
{
    check_aligned(outputs, targets);
    double sum = 0.0;
    for (std::size_t k = 0; k < outputs.size(); ++k) {
        const double z = (outputs[k] - targets[k].mean) / targets[k].sd;
        sum += z * z;
    }
    return sum;
}

double log_likelihood(std::span<const double> outputs, const TargetSet& targets)
{
    check_aligned(outputs, targets);
    double sum = 0.0;
    for (std::size_t k = 0; k < outputs.size(); ++k) {
        const auto& t = targets[k];
        sum += log_normal_density(outputs[k], t.mean, t.sd) - log_normal_density(t.mean, t.mean, t.sd);
    }
    return sum;
}

double chi_square_p_value(double gof, int dof)
{
    if (dof <= 0) {
        throw DomainError("degrees of freedom must be positive");
    }
    if (std::isnan(gof) || gof < 0.0) {
        throw DomainError("goodness of fit must be non-negative");
    }
    if (std::isinf(gof)) {
        return 0.0;
    }
    return boost::math::gamma_q(0.5 * dof, 0.5 * gof);
}

TargetSet load_target_set(std::istream& in, const std::string& source_name)
{
    std::string line;
    std::size_t line_number = 0;
    std::vector<Target> targets;
    bool header_seen = false;
    std::size_t col_name = 0, col_mean = 1, col_sd = 2, col_units = 3;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty() || line == "\r") {
            continue;
        }
        auto fields = csv::split_line(line, line_number);
        if (!header_seen) {
            header_seen = true;
            std::size_t found = 0;
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (fields[i] == "name") {
                    col_name = i, ++found;
                }
                else if (fields[i] == "mean") {
                    col_mean = i, ++found;
                }
                else if (fields[i] == "sd") {
                    col_sd = i, ++found;
                }
                else if (fields[i] == "units") {
                    col_units = i, ++found;
                }
            }
            if (found != 4 || fields.size() != 4) {
                throw ParseError(source_name + ": header must be name,mean,sd,units", line_number);
            }
            continue;
        }
        if (fields.size() != 4) {
            throw ParseError(source_name + ": expected 4 columns, found " + std::to_string(fields.size()),
                             line_number);
        }
        Target t;
        t.name  = fields[col_name];
        t.units = fields[col_units];
        try {
            t.mean = csv::parse_double(fields[col_mean], line_number);
            t.sd   = csv::parse_double(fields[col_sd], line_number);
        }
        catch (const ParseError&) {
            throw ParseError(source_name + ": row '" + t.name + "' has an invalid mean or sd", line_number);
        }
        if (!(t.sd > 0.0) || !std::isfinite(t.sd)) {
            throw ParseError(source_name + ": row '" + t.name + "' needs a positive finite sd", line_number);
        }
        targets.push_back(std::move(t));
    }
    if (targets.empty()) {
        throw ParseError(source_name + ": no target rows");
    }
    try {
        return TargetSet(std::move(targets));
    }
    catch (const DomainError& e) {
        throw ParseError(source_name + ": " + e.what());
    }
}

TargetSet load_target_set(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open target file " + path.string());
    }
    return load_target_set(in, path.string());
}

void write_target_set(std::ostream& out, const TargetSet& targets)
{
    out << "name,mean,sd,units\n";
    for (const auto& t : targets) {
        out << csv::quote(t.name) << ',' << csv::format_double(t.mean) << ',' << csv::format_double(t.sd) << ','
            << csv::quote(t.units) << '\n';
    }
}

} // namespace calib
