#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mhla/certificate.hpp"
#include "mhla/learner.hpp"
#include "mhla/model.hpp"
#include "mhla/program.hpp"
#include "mhla/tasks.hpp"

namespace mhla {

/// 17-significant-digit decimal rendering; round-trips every double exactly
/// and is the wire format for all float fields.
inline std::string format_double17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline std::string json_matrix(const Matrix& m) {
    std::string out = "[";
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out += (i ? ",[" : "[");
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out += ",";
            out += format_double17(m(i, j));
        }
        out += "]";
    }
    out += "]";
    return out;
}

inline std::string json_vector(const Vector& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double17(v[i]);
    }
    out += "]";
    return out;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty()) throw InputError("matrix json: expected nested arrays");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw InputError("matrix json: ragged rows");
        for (std::size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

inline nlohmann::json parse_json(const std::string& text, const char* what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string(what) + ": " + e.what());
    }
}

template <typename F>
auto with_json_errors(const char* what, F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string(what) + ": " + e.what());
    }
}

inline std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// MhlaParams <-> JSON
// ---------------------------------------------------------------------------

inline std::string params_to_json(const MhlaParams& params) {
    std::string out = "{\"d\":" + std::to_string(params.dim) + ",\"heads\":[";
    for (std::size_t h = 0; h < params.heads.size(); ++h) {
        if (h) out += ",";
        out += "{\"v\":" + detail::json_matrix(params.heads[h].v) +
               ",\"q\":" + detail::json_matrix(params.heads[h].q) + "}";
    }
    out += "]}";
    return out;
}

inline MhlaParams params_from_json(const std::string& text) {
    const nlohmann::json j = detail::parse_json(text, "params json");
    return detail::with_json_errors("params json", [&] {
        MhlaParams p;
        p.dim = j.at("d").get<std::size_t>();
        for (const auto& head : j.at("heads"))
            p.heads.push_back(Head{detail::matrix_from_json(head.at("v")),
                                   detail::matrix_from_json(head.at("q"))});
        p.validate();
        return p;
    });
}

// ---------------------------------------------------------------------------
// Dataset <-> JSON lines
// ---------------------------------------------------------------------------

inline std::string sample_to_jsonl(const SequenceSample& s) {
    return "{\"z\":" + detail::json_matrix(s.z) + ",\"y\":" + detail::json_vector(s.y) + "}";
}

inline std::string dataset_to_jsonl(const Dataset& data) {
    std::string out;
    for (const auto& s : data.samples) {
        out += sample_to_jsonl(s);
        out += "\n";
    }
    return out;
}

inline Dataset dataset_from_jsonl(std::istream& in) {
    Dataset data;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = detail::parse_json(line, "dataset jsonl");
        detail::with_json_errors("dataset jsonl", [&] {
            SequenceSample s;
            s.z = detail::matrix_from_json(j.at("z"));
            s.y = j.at("y").get<std::vector<double>>();
            data.samples.push_back(std::move(s));
            return 0;
        });
    }
    data.validate();
    return data;
}

inline Dataset dataset_from_jsonl(const std::string& text) {
    std::istringstream in(text);
    return dataset_from_jsonl(in);
}

// ---------------------------------------------------------------------------
// AutomatonSpec / Vocabulary <-> JSON
// ---------------------------------------------------------------------------

inline std::string automaton_to_json(const AutomatonSpec& spec) {
    std::string out = "{\"states\":" + std::to_string(spec.states) +
                      ",\"alphabet\":" + std::to_string(spec.alphabet) + ",\"delta\":[";
    for (std::size_t s = 0; s < spec.states; ++s) {
        out += (s ? ",[" : "[");
        for (std::size_t w = 0; w < spec.alphabet; ++w) {
            if (w) out += ",";
            out += std::to_string(spec.delta[s][w]);
        }
        out += "]";
    }
    out += "]}";
    return out;
}

inline AutomatonSpec automaton_from_json(const std::string& text) {
    const nlohmann::json j = detail::parse_json(text, "automaton json");
    return detail::with_json_errors("automaton json", [&] {
        AutomatonSpec spec;
        spec.states = j.at("states").get<std::size_t>();
        spec.alphabet = j.at("alphabet").get<std::size_t>();
        spec.delta = j.at("delta").get<std::vector<std::vector<std::size_t>>>();
        spec.validate();
        return spec;
    });
}

inline std::string vocabulary_to_json(const Vocabulary& vocab) {
    std::string out = "[";
    for (std::size_t i = 0; i < vocab.symbols.size(); ++i) {
        if (i) out += ",";
        out += "\"" + detail::json_escape(vocab.symbols[i]) + "\"";
    }
    out += "]";
    return out;
}

inline Vocabulary vocabulary_from_json(const std::string& text) {
    const nlohmann::json j = detail::parse_json(text, "vocabulary json");
    return detail::with_json_errors("vocabulary json", [&] {
        Vocabulary vocab;
        vocab.symbols = j.get<std::vector<std::string>>();
        return vocab;
    });
}

// ---------------------------------------------------------------------------
// Program DSL <-> JSON
// ---------------------------------------------------------------------------

inline std::string program_to_json(const MhlaProgram& prog) {
    std::string out = "{\"schema\":[";
    for (std::size_t i = 0; i < prog.schema.attributes.size(); ++i) {
        if (i) out += ",";
        out += "{\"name\":\"" + detail::json_escape(prog.schema.attributes[i].name) +
               "\",\"size\":" + std::to_string(prog.schema.attributes[i].size) + "}";
    }
    out += "],\"instructions\":[";
    for (std::size_t i = 0; i < prog.instructions.size(); ++i) {
        const auto& ins = prog.instructions[i];
        if (i) out += ",";
        auto ints = [](const std::vector<std::size_t>& v) {
            std::string s = "[";
            for (std::size_t k = 0; k < v.size(); ++k) {
                if (k) s += ",";
                s += std::to_string(v[k]);
            }
            return s + "]";
        };
        out += "{\"key\":\"" + detail::json_escape(ins.key) + "\",\"value\":\"" +
               detail::json_escape(ins.value) + "\",\"source\":\"" +
               detail::json_escape(ins.source) + "\",\"dest\":\"" +
               detail::json_escape(ins.dest) + "\",\"bq\":" + ints(ins.bq) +
               ",\"bv\":" + ints(ins.bv) +
               ",\"copy_through\":" + (ins.copy_through ? "true" : "false") + "}";
    }
    out += "]}";
    return out;
}

inline MhlaProgram program_from_json(const std::string& text) {
    const nlohmann::json j = detail::parse_json(text, "program json");
    return detail::with_json_errors("program json", [&] {
    MhlaProgram prog;
    for (const auto& attr : j.at("schema"))
        prog.schema.attributes.push_back(
            {attr.at("name").get<std::string>(), attr.at("size").get<std::size_t>()});
    for (const auto& ins_j : j.at("instructions")) {
        LookupInstruction ins;
        ins.key = ins_j.at("key").get<std::string>();
        ins.value = ins_j.at("value").get<std::string>();
        ins.source = ins_j.at("source").get<std::string>();
        ins.dest = ins_j.at("dest").get<std::string>();
        ins.bq = ins_j.at("bq").get<std::vector<std::size_t>>();
        ins.bv = ins_j.at("bv").get<std::vector<std::size_t>>();
        if (ins_j.contains("copy_through")) ins.copy_through = ins_j["copy_through"].get<bool>();
        prog.instructions.push_back(std::move(ins));
    }
    prog.validate();
    return prog;
    });
}

// ---------------------------------------------------------------------------
// Reports -> JSON
// ---------------------------------------------------------------------------

/// Deterministic report body; wall time deliberately stays out of the file so
/// reruns are byte-identical (it is logged to stderr by the CLI instead).
inline std::string fit_report_to_json(const FitReport& report) {
    return "{\"train_mse\":" + format_double17(report.train_mse) +
           ",\"regressor_rank\":" + std::to_string(report.regressor_rank) +
           ",\"head_count\":" + std::to_string(report.learned.heads.size()) +
           ",\"n_samples\":" + std::to_string(report.residual_per_sample.size()) + "}";
}

inline std::string certificate_to_json(const CertificateReport& report) {
    return "{\"psi\":" + std::to_string(report.psi) +
           ",\"lambda_min\":" + format_double17(report.lambda_min) +
           ",\"lambda_max\":" + format_double17(report.lambda_max) +
           ",\"rank_estimate\":" + std::to_string(report.rank_estimate) +
           ",\"identifiable\":" + (report.identifiable ? "true" : "false") +
           ",\"threshold_used\":" + format_double17(report.threshold_used) +
           ",\"note\":\"" + detail::json_escape(report.note) + "\"}";
}

// ---------------------------------------------------------------------------
// CSV (RFC 4180: CRLF line endings, header row, quoting when needed)
// ---------------------------------------------------------------------------

class CsvWriter {
  public:
    explicit CsvWriter(std::vector<std::string> header) { row(header); }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ += ",";
            out_ += quote(fields[i]);
        }
        out_ += "\r\n";
    }

    const std::string& text() const { return out_; }

  private:
    static std::string quote(const std::string& field) {
        if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
        std::string q = "\"";
        for (char c : field) {
            if (c == '"') q += '"';
            q += c;
        }
        return q + "\"";
    }
    std::string out_;
};

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw InputError("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace mhla
