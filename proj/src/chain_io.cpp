#include "calib/chain_io.h"
#include "calib/csv.h"
#include "calib/error.h"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace calib
{

namespace
{

constexpr std::size_t kLeadingColumns  = 2; // chain_id, iteration
constexpr std::size_t kTrailingColumns = 3; // log_posterior, gof, accepted

std::size_t parse_count(const std::string& field, const std::string& column, std::size_t line,
                        const std::string& source)
{
    std::size_t value = 0;
    const char* end   = field.data() + field.size();
    auto [ptr, ec]    = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw ParseError(source + ": column " + column + " is not a non-negative integer: '" + field + "'", line);
    }
    return value;
}

std::ofstream open_for_write(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

} // namespace

void write_chain_csv(std::ostream& out, const Chain& chain)
{
    out << "chain_id,iteration";
    for (const auto& name : chain.parameter_names) {
        out << ',' << csv::quote(name);
    }
    out << ",log_posterior,gof,accepted\n";
    for (std::size_t r = 0; r < chain.size(); ++r) {
        out << chain.metadata.chain_id << ',' << chain.iteration[r];
        for (double v : chain.row(r)) {
            out << ',' << csv::format_double(v);
        }
        out << ',' << csv::format_double(chain.log_posterior[r]) << ',' << csv::format_double(chain.gof[r]) << ','
            << static_cast<int>(chain.accepted[r]) << '\n';
    }
}

void write_chain_csv(const std::filesystem::path& path, const Chain& chain)
{
    std::ostringstream text;
    write_chain_csv(text, chain);
    write_file_atomic(path, text.str());
}

Chain read_chain_csv(std::istream& in, const std::string& source_name)
{
    Chain chain;
    std::string line;
    std::size_t line_number = 0;
    bool header_seen        = false;
    bool chain_id_seen      = false;
    std::size_t columns     = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = csv::split_line(line, line_number);
        if (!header_seen) {
            header_seen = true;
            columns     = fields.size();
            if (columns < kLeadingColumns + kTrailingColumns + 1 || fields[0] != "chain_id" ||
                fields[1] != "iteration" || fields[columns - 3] != "log_posterior" || fields[columns - 2] != "gof" ||
                fields[columns - 1] != "accepted") {
                throw ParseError(source_name +
                                     ": header must be chain_id,iteration,<parameters...>,log_posterior,gof,accepted",
                                 line_number);
            }
            chain.parameter_names.assign(fields.begin() + kLeadingColumns, fields.end() - kTrailingColumns);
            continue;
        }
        if (fields.size() != columns) {
            throw ParseError(source_name + ": expected " + std::to_string(columns) + " columns, found " +
                                 std::to_string(fields.size()),
                             line_number);
        }
        const std::size_t id = parse_count(fields[0], "chain_id", line_number, source_name);
        if (chain_id_seen && id != chain.metadata.chain_id) {
            throw ParseError(source_name + ": chain_id changes from " + std::to_string(chain.metadata.chain_id) +
                                 " to " + std::to_string(id),
                             line_number);
        }
        chain.metadata.chain_id = id;
        chain_id_seen           = true;
        chain.iteration.push_back(parse_count(fields[1], "iteration", line_number, source_name));
        for (std::size_t c = kLeadingColumns; c < columns - kTrailingColumns; ++c) {
            chain.values.push_back(csv::parse_double(fields[c], line_number));
        }
        chain.log_posterior.push_back(csv::parse_double(fields[columns - 3], line_number));
        chain.gof.push_back(csv::parse_double(fields[columns - 2], line_number));
        const auto& acc = fields[columns - 1];
        if (acc != "0" && acc != "1") {
            throw ParseError(source_name + ": accepted must be 0 or 1, found '" + acc + "'", line_number);
        }
        chain.accepted.push_back(acc == "1" ? 1 : 0);
    }
    if (!header_seen) {
        throw ParseError(source_name + ": empty chain file", 1);
    }
    return chain;
}

Chain read_chain_csv(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open chain file '" + path.string() + "'");
    }
    return read_chain_csv(in, path.string());
}

std::string chain_metadata_to_json(const ChainMetadata& m)
{
    const nlohmann::json doc = {{"chain_id", m.chain_id},
                                {"seed", m.seed},
                                {"model_id", m.model_id},
                                {"iterations", m.options.iterations},
                                {"burn_in", m.options.burn_in},
                                {"thinning", m.options.thinning},
                                {"block_size", m.block_size},
                                {"acceptance_rate", m.acceptance_rate},
                                {"failed_evaluations", m.failed_evaluations}};
    return doc.dump(2) + "\n";
}

ChainMetadata chain_metadata_from_json(std::string_view text, const std::string& source_name)
{
    try {
        const auto doc = nlohmann::json::parse(text);
        ChainMetadata m;
        m.chain_id           = doc.at("chain_id").get<std::size_t>();
        m.seed               = doc.at("seed").get<std::uint64_t>();
        m.model_id           = doc.at("model_id").get<std::string>();
        m.options.iterations = doc.at("iterations").get<std::size_t>();
        m.options.burn_in    = doc.at("burn_in").get<std::size_t>();
        m.options.thinning   = doc.at("thinning").get<std::size_t>();
        m.block_size         = doc.at("block_size").get<std::size_t>();
        m.acceptance_rate    = doc.at("acceptance_rate").get<double>();
        m.failed_evaluations = doc.at("failed_evaluations").get<std::size_t>();
        return m;
    }
    catch (const nlohmann::json::exception& e) {
        throw ParseError(source_name + ": invalid chain metadata: " + e.what());
    }
}

std::filesystem::path chain_csv_path(const std::filesystem::path& dir, std::size_t chain_id)
{
    return dir / ("chain_" + std::to_string(chain_id) + ".csv");
}

std::filesystem::path chain_metadata_path(const std::filesystem::path& dir, std::size_t chain_id)
{
    return dir / ("chain_" + std::to_string(chain_id) + ".meta.json");
}

void write_chain_set(const std::filesystem::path& dir, const ChainSet& chains)
{
    for (const auto& chain : chains.chains) {
        write_chain_csv(chain_csv_path(dir, chain.metadata.chain_id), chain);
        write_file_atomic(chain_metadata_path(dir, chain.metadata.chain_id), chain_metadata_to_json(chain.metadata));
    }
}

ChainSet read_chain_set(const std::filesystem::path& dir)
{
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("'" + dir.string() + "' is not a directory");
    }
    std::map<std::size_t, std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (!entry.is_regular_file() || !name.starts_with("chain_") || !name.ends_with(".csv")) {
            continue;
        }
        const std::string digits = name.substr(6, name.size() - 10);
        if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
            continue;
        }
        files.emplace(std::stoul(digits), entry.path());
    }
    ChainSet set;
    for (const auto& [id, path] : files) {
        Chain chain = read_chain_csv(path);
        if (!set.chains.empty() && chain.parameter_names != set.chains.front().parameter_names) {
            throw ParseError("'" + path.string() + "': parameter columns differ from '" +
                             chain_csv_path(dir, set.chains.front().metadata.chain_id).string() + "'",
                             1);
        }
        const auto meta_path = chain_metadata_path(dir, id);
        if (std::filesystem::exists(meta_path)) {
            std::ifstream in(meta_path);
            std::stringstream text;
            text << in.rdbuf();
            const std::size_t csv_id = chain.metadata.chain_id;
            chain.metadata           = chain_metadata_from_json(text.str(), meta_path.string());
            if (chain.size() > 0 && chain.metadata.chain_id != csv_id) {
                throw ParseError("'" + meta_path.string() + "': chain_id disagrees with the chain file");
            }
        }
        else if (chain.size() == 0) {
            chain.metadata.chain_id = id;
        }
        set.chains.push_back(std::move(chain));
    }
    return set;
}

void write_gof_trace(std::ostream& out, const ChainSet& chains)
{
    out << "iteration";
    std::size_t rows = 0;
    for (const auto& chain : chains.chains) {
        out << ",chain_" << chain.metadata.chain_id;
        rows = std::max(rows, chain.size());
    }
    out << '\n';
    for (std::size_t r = 0; r < rows; ++r) {
        const Chain* first = nullptr;
        for (const auto& chain : chains.chains) {
            if (r < chain.size()) {
                first = &chain;
                break;
            }
        }
        out << first->iteration[r];
        for (const auto& chain : chains.chains) {
            out << ',';
            if (r < chain.size()) {
                out << csv::format_double(chain.gof[r]);
            }
        }
        out << '\n';
    }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        auto out = open_for_write(tmp);
        out << contents;
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IoError("failed writing '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move '" + tmp.string() + "' into place: " + ec.message());
    }
}

} // namespace calib
