#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"

namespace dipolar {

inline constexpr const char* tool_version = "1.0.0";

// Header row, then one row per call; doubles with 17 significant digits,
// integers and strings verbatim.
class csv_writer {
public:
    csv_writer(const std::filesystem::path& file, const std::vector<std::string>& header) : out_(file) {
        if (!out_) throw numeric_error("cannot open output file " + file.string());
        out_.imbue(std::locale::classic());
        out_ << std::setprecision(17);
        for (size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }

    template <class... T>
    void row(const T&... fields) {
        bool first = true;
        ((out_ << (first ? "" : ",") << format(fields), first = false), ...);
        out_ << '\n';
    }

private:
    static std::string format(double v) {
        std::ostringstream s;
        s.imbue(std::locale::classic());
        s << std::setprecision(17) << v;
        return s.str();
    }
    static std::string format(bool v) { return v ? "1" : "0"; }
    static std::string format(const std::string& v) { return v; }
    static std::string format(const char* v) { return v; }
    template <class I, class = std::enable_if_t<std::is_integral_v<I>>>
    static std::string format(I v) {
        return std::to_string(v);
    }

    std::ofstream out_;
};

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

// One per run; lists every file the run wrote.
struct run_manifest {
    std::string command;
    nlohmann::json config;
    std::string started = utc_timestamp();
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;
    nlohmann::json results = nlohmann::json::object();

    void write(const std::filesystem::path& dir) {
        nlohmann::json j;
        j["command"] = command;
        j["tool_version"] = tool_version;
        j["config"] = config;
        j["started"] = started;
        j["finished"] = utc_timestamp();
        j["outputs"] = outputs;
        j["warnings"] = warnings;
        j["results"] = results;
        std::ofstream out(dir / "manifest.json");
        if (!out) throw numeric_error("cannot write manifest in " + dir.string());
        out << j.dump(2) << '\n';
    }
};

}  // namespace dipolar
