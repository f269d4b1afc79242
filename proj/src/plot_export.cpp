#include "calib/plot_export.h"
#include "calib/chain_io.h"
#include "calib/csv.h"
#include "calib/diagnostics.h"
#include "calib/error.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace calib
{

namespace
{

std::string file_stem(const std::string& parameter)
{
    std::string out;
    for (char ch : parameter) {
        const bool keep = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
                          ch == '_' || ch == '-' || ch == '.';
        out += keep ? ch : '_';
    }
    return out;
}

void require_chains(const ChainSet& chains)
{
    if (chains.size() == 0) {
        throw InsufficientChainsError("nothing to export: no chains");
    }
}

std::string chain_columns(const ChainSet& chains)
{
    std::string out;
    for (const auto& chain : chains.chains) {
        out += ",chain_" + std::to_string(chain.metadata.chain_id);
    }
    return out;
}

} // namespace

ExportKind export_kind_from_string(const std::string& text)
{
    if (text == "trace") {
        return ExportKind::Trace;
    }
    if (text == "density") {
        return ExportKind::Density;
    }
    if (text == "prior-posterior") {
        return ExportKind::PriorPosterior;
    }
    throw ConfigError("unknown export kind '" + text + "' (expected trace, density or prior-posterior)");
}

std::vector<std::filesystem::path> export_trace(const ChainSet& chains, const std::filesystem::path& dir)
{
    require_chains(chains);
    std::filesystem::create_directories(dir);
    std::size_t rows = 0;
    for (const auto& chain : chains.chains) {
        rows = std::max(rows, chain.size());
    }
    std::vector<std::filesystem::path> written;
    const auto& names = chains.parameter_names();
    for (std::size_t p = 0; p < names.size(); ++p) {
        std::ostringstream out;
        out << "iteration" << chain_columns(chains) << '\n';
        for (std::size_t r = 0; r < rows; ++r) {
            bool first = true;
            for (const auto& chain : chains.chains) {
                if (first) {
                    const auto* owner = &chain;
                    for (const auto& c : chains.chains) {
                        if (r < c.size()) {
                            owner = &c;
                            break;
                        }
                    }
                    out << owner->iteration[r];
                    first = false;
                }
                out << ',';
                if (r < chain.size()) {
                    out << csv::format_double(chain.value(r, p));
                }
            }
            out << '\n';
        }
        written.push_back(dir / ("trace_" + file_stem(names[p]) + ".csv"));
        write_file_atomic(written.back(), out.str());
    }
    return written;
}

std::vector<std::filesystem::path> export_density(const ChainSet& chains, const std::filesystem::path& dir,
                                                  std::size_t bins)
{
    require_chains(chains);
    if (bins == 0) {
        throw DomainError("density export needs at least one bin");
    }
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    const auto& names = chains.parameter_names();
    for (std::size_t p = 0; p < names.size(); ++p) {
        const auto pooled = chains.pooled(p);
        if (pooled.empty()) {
            throw InsufficientDataError("no recorded states for '" + names[p] + "'");
        }
        auto [lo, hi] = std::minmax_element(pooled.begin(), pooled.end());
        double a      = *lo;
        double b      = *hi;
        if (!(b > a)) {
            const double pad = std::max(std::abs(a) * 1e-6, 1e-12);
            a -= pad;
            b += pad;
        }
        const double width = (b - a) / static_cast<double>(bins);
        std::vector<std::vector<double>> heights;
        for (const auto& chain : chains.chains) {
            std::vector<double> h(bins, 0.0);
            for (std::size_t r = 0; r < chain.size(); ++r) {
                const auto k = static_cast<std::size_t>((chain.value(r, p) - a) / width);
                h[std::min(k, bins - 1)] += 1.0;
            }
            for (double& v : h) {
                v = chain.size() ? v / (static_cast<double>(chain.size()) * width) : 0.0;
            }
            heights.push_back(std::move(h));
        }
        std::ostringstream out;
        out << "bin_center,bin_width" << chain_columns(chains) << '\n';
        for (std::size_t k = 0; k < bins; ++k) {
            out << csv::format_double(a + width * (static_cast<double>(k) + 0.5)) << ',' << csv::format_double(width);
            for (const auto& h : heights) {
                out << ',' << csv::format_double(h[k]);
            }
            out << '\n';
        }
        written.push_back(dir / ("density_" + file_stem(names[p]) + ".csv"));
        write_file_atomic(written.back(), out.str());
    }
    return written;
}

std::vector<std::filesystem::path> export_prior_posterior(const ChainSet& chains, const JointPrior& prior,
                                                          const std::filesystem::path& dir, std::size_t bins)
{
    require_chains(chains);
    const auto& names = chains.parameter_names();
    if (prior.size() != names.size()) {
        throw AlignmentError("prior has " + std::to_string(prior.size()) + " factors, chains have " +
                             std::to_string(names.size()) + " parameters");
    }
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for (std::size_t p = 0; p < names.size(); ++p) {
        const auto pooled  = chains.pooled(p);
        const auto summary = prior_posterior_summary(prior[p], pooled, bins);
        std::ostringstream out;
        out << "bin_center,bin_width,prior_height,posterior_height\n";
        for (const auto& bin : summary.bins) {
            out << csv::format_double(bin.center) << ',' << csv::format_double(bin.width) << ','
                << (std::isnan(bin.prior_height) ? std::string() : csv::format_double(bin.prior_height)) << ','
                << csv::format_double(bin.posterior_height) << '\n';
        }
        written.push_back(dir / ("prior_posterior_" + file_stem(names[p]) + ".csv"));
        write_file_atomic(written.back(), out.str());
    }
    return written;
}

} // namespace calib
