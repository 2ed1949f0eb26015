// SPDX-License-Identifier: Apache-2.0

#include "cloudmd/datastore.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

namespace cloudmd::datastore {

using json = nlohmann::json;

namespace {
constexpr std::string_view kDatasetMagic = "CMDS";
constexpr std::string_view kModelMagic = "CMDM";
constexpr std::string_view kTextMagic = "#cloudmd-dataset";
constexpr std::uint32_t kDatasetVersion = 1;
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StoreError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw StoreError("write failed for " + path.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw StoreError("cannot move into place " + path.string());
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- text helpers ----

namespace {

std::string escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\t': out += "\\t"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    return out;
}

std::string unescape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\') {
            out += s[i];
            continue;
        }
        if (++i == s.size()) throw FormatError("dangling escape");
        switch (s[i]) {
            case '\\': out += '\\'; break;
            case 't': out += '\t'; break;
            case 'n': out += '\n'; break;
            case 'r': out += '\r'; break;
            default: throw FormatError(std::string("unknown escape \\") + s[i]);
        }
    }
    return out;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

void put_double(std::string& out, double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

double parse_double(std::string_view s) {
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw FormatError("bad number '" + std::string(s) + "'");
    return v;
}

template <typename T>
T parse_uint(std::string_view s) {
    T v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw FormatError("bad integer '" + std::string(s) + "'");
    return v;
}

Label parse_label(std::string_view s) {
    try {
        return label_from_string(s);
    } catch (const DomainError& e) {
        throw FormatError(e.what());
    }
}

}  // namespace

std::string format_snapshot_line(const VmSnapshot& s) {
    std::string out;
    out += std::to_string(s.experiment_id);
    out += '\t';
    out += std::to_string(s.vm_id);
    out += '\t';
    put_double(out, s.t);
    out += '\t';
    out += to_string(s.label);
    out += '\t';
    out += std::to_string(s.processes.size());
    for (const auto& p : s.processes) {
        out += '\t';
        out += escape(p.name);
        out += '\t';
        out += escape(p.cmdline);
        for (double v : p.values) {
            out += '\t';
            put_double(out, v);
        }
    }
    return out;
}

VmSnapshot parse_snapshot_line(std::string_view line, std::size_t feature_count) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto f = split_tabs(line);
    if (f.size() < 5) throw FormatError("snapshot line has " + std::to_string(f.size()) + " fields, need at least 5");
    VmSnapshot s;
    s.experiment_id = parse_uint<std::uint32_t>(f[0]);
    s.vm_id = parse_uint<std::uint32_t>(f[1]);
    s.t = parse_double(f[2]);
    s.label = parse_label(f[3]);
    const auto n = parse_uint<std::size_t>(f[4]);
    const std::size_t per = 2 + feature_count;
    if (f.size() - 5 != n * per)
        throw FormatError("snapshot line declares " + std::to_string(n) + " processes with " +
                          std::to_string(feature_count) + " features but has " + std::to_string(f.size() - 5) +
                          " process fields");
    s.processes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t base = 5 + i * per;
        auto& p = s.processes[i];
        p.name = unescape(f[base]);
        p.cmdline = unescape(f[base + 1]);
        p.values.resize(feature_count);
        for (std::size_t j = 0; j < feature_count; ++j) p.values[j] = parse_double(f[base + 2 + j]);
    }
    return s;
}

// ---- dataset ----

namespace {

void check_schema(const FeatureSchema& found, const FeatureSchema* expected) {
    if (expected && !(found == *expected))
        throw SchemaError("dataset schema has " + std::to_string(found.size()) + " features (hash " +
                          std::to_string(found.hash()) + "), expected " + std::to_string(expected->size()) +
                          " (hash " + std::to_string(expected->hash()) + ")");
}

std::string encode_binary(const Dataset& d) {
    ByteWriter w;
    w.put_bytes(kDatasetMagic);
    w.put<std::uint32_t>(kDatasetVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(d.schema.size()));
    for (const auto& n : d.schema.names()) w.put_string(n);
    w.put<double>(d.timeline.duration_s);
    w.put<double>(d.timeline.sample_interval_s);
    w.put<double>(d.timeline.benign_end_s);
    w.put<double>(d.timeline.malicious_start_s);
    w.put<std::uint32_t>(d.row_cap);
    w.put<std::uint32_t>(d.experiment_count);
    w.put<std::uint64_t>(d.snapshots.size());
    w.put<std::uint64_t>(d.schema.hash());
    for (const auto& s : d.snapshots) {
        w.put<std::uint32_t>(s.experiment_id);
        w.put<std::uint32_t>(s.vm_id);
        w.put<double>(s.t);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(s.label));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(s.processes.size()));
        for (const auto& p : s.processes) {
            if (p.values.size() != d.schema.size()) throw DomainError("process value count differs from schema");
            w.put_string(p.name);
            w.put_string(p.cmdline);
            for (double v : p.values) w.put<double>(v);
        }
    }
    return w.take();
}

Dataset decode_binary(std::string_view bytes, const FeatureSchema* expected) {
    ByteReader r(bytes);
    if (r.get_bytes(4) != kDatasetMagic) throw FormatError("not a dataset file");
    const auto version = r.get<std::uint32_t>();
    if (version != kDatasetVersion) throw VersionError("dataset version " + std::to_string(version) + " unsupported");
    const auto nf = r.get<std::uint32_t>();
    if (nf > r.remaining()) throw TruncatedError("feature count exceeds file size");
    std::vector<std::string> names(nf);
    for (auto& n : names) n = r.get_string();
    Dataset d;
    try {
        d.schema = FeatureSchema(std::move(names));
    } catch (const DomainError& e) {
        throw FormatError(std::string("bad schema: ") + e.what());
    }
    d.timeline.duration_s = r.get<double>();
    d.timeline.sample_interval_s = r.get<double>();
    d.timeline.benign_end_s = r.get<double>();
    d.timeline.malicious_start_s = r.get<double>();
    d.row_cap = r.get<std::uint32_t>();
    d.experiment_count = r.get<std::uint32_t>();
    const auto count = r.get<std::uint64_t>();
    const auto hash = r.get<std::uint64_t>();
    if (hash != d.schema.hash()) throw FormatError("schema hash does not match the stored names");
    check_schema(d.schema, expected);
    if (count > r.remaining()) throw TruncatedError("record count exceeds file size");
    d.snapshots.resize(count);
    for (auto& s : d.snapshots) {
        s.experiment_id = r.get<std::uint32_t>();
        s.vm_id = r.get<std::uint32_t>();
        s.t = r.get<double>();
        const auto label = r.get<std::uint8_t>();
        if (label > 2) throw FormatError("bad label byte");
        s.label = static_cast<Label>(label);
        const auto np = r.get<std::uint32_t>();
        if (np > r.remaining()) throw TruncatedError("process count exceeds file size");
        s.processes.resize(np);
        for (auto& p : s.processes) {
            p.name = r.get_string();
            p.cmdline = r.get_string();
            p.values.resize(nf);
            for (auto& v : p.values) v = r.get<double>();
        }
    }
    if (!r.done()) throw FormatError("trailing bytes after the last record");
    return d;
}

std::string encode_text(const Dataset& d) {
    std::string out(kTextMagic);
    out += " v" + std::to_string(kDatasetVersion) + "\n#features";
    for (const auto& n : d.schema.names()) out += "\t" + escape(n);
    out += "\n#timeline";
    for (double v : {d.timeline.duration_s, d.timeline.sample_interval_s, d.timeline.benign_end_s,
                     d.timeline.malicious_start_s}) {
        out += '\t';
        put_double(out, v);
    }
    out += "\n#row_cap\t" + std::to_string(d.row_cap);
    out += "\n#experiments\t" + std::to_string(d.experiment_count);
    out += "\n#records\t" + std::to_string(d.snapshots.size()) + "\n";
    for (const auto& s : d.snapshots) {
        for (const auto& p : s.processes)
            if (p.values.size() != d.schema.size()) throw DomainError("process value count differs from schema");
        out += format_snapshot_line(s);
        out += '\n';
    }
    return out;
}

Dataset decode_text(std::string_view bytes, const FeatureSchema* expected) {
    std::vector<std::string_view> lines;
    for (std::size_t start = 0; start < bytes.size();) {
        auto end = bytes.find('\n', start);
        if (end == std::string_view::npos) end = bytes.size();
        lines.push_back(bytes.substr(start, end - start));
        start = end + 1;
    }
    if (lines.empty() || lines[0].substr(0, kTextMagic.size()) != kTextMagic) throw FormatError("not a dataset file");
    if (lines[0] != std::string(kTextMagic) + " v" + std::to_string(kDatasetVersion))
        throw VersionError("unsupported text dataset header '" + std::string(lines[0]) + "'");
    std::map<std::string, std::vector<std::string_view>, std::less<>> header;
    std::size_t i = 1;
    for (; i < lines.size() && !lines[i].empty() && lines[i][0] == '#'; ++i) {
        auto f = split_tabs(lines[i].substr(1));
        const std::string key(f[0]);
        f.erase(f.begin());
        header[key] = std::move(f);
    }
    auto field = [&](const char* key, std::size_t n) -> const std::vector<std::string_view>& {
        auto it = header.find(key);
        if (it == header.end() || (n && it->second.size() != n))
            throw FormatError(std::string("missing or malformed header '") + key + "'");
        return it->second;
    };
    Dataset d;
    std::vector<std::string> names;
    for (auto n : field("features", 0)) names.push_back(unescape(n));
    try {
        d.schema = FeatureSchema(std::move(names));
    } catch (const DomainError& e) {
        throw FormatError(std::string("bad schema: ") + e.what());
    }
    check_schema(d.schema, expected);
    const auto& tl = field("timeline", 4);
    d.timeline.duration_s = parse_double(tl[0]);
    d.timeline.sample_interval_s = parse_double(tl[1]);
    d.timeline.benign_end_s = parse_double(tl[2]);
    d.timeline.malicious_start_s = parse_double(tl[3]);
    d.row_cap = parse_uint<std::uint32_t>(field("row_cap", 1)[0]);
    d.experiment_count = parse_uint<std::uint32_t>(field("experiments", 1)[0]);
    const auto count = parse_uint<std::uint64_t>(field("records", 1)[0]);
    for (; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        try {
            d.snapshots.push_back(parse_snapshot_line(lines[i], d.schema.size()));
        } catch (const StoreError& e) {
            throw FormatError("line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    if (d.snapshots.size() != count)
        throw TruncatedError("header declares " + std::to_string(count) + " records, found " +
                             std::to_string(d.snapshots.size()));
    return d;
}

}  // namespace

std::string encode_dataset(const Dataset& d, Format format) {
    return format == Format::Binary ? encode_binary(d) : encode_text(d);
}

Dataset decode_dataset(std::string_view bytes, const FeatureSchema* expected) {
    if (bytes.substr(0, 4) == kDatasetMagic) return decode_binary(bytes, expected);
    if (bytes.substr(0, kTextMagic.size()) == kTextMagic) return decode_text(bytes, expected);
    throw FormatError("unrecognized dataset header");
}

void write_dataset(const Dataset& d, const fs::path& path, Format format) {
    write_file_atomic(path, encode_dataset(d, format));
}

Dataset read_dataset(const fs::path& path, const FeatureSchema* expected) {
    return decode_dataset(read_file(path), expected);
}

// ---- manifest and split ----

void write_manifest(const Manifest& m, const fs::path& path) {
    json j;
    j["format"] = "cloudmd-manifest";
    j["version"] = 1;
    j["base_seed"] = m.base_seed;
    j["schema_hash"] = m.schema_hash;
    j["experiments"] = json::array();
    for (const auto& e : m.experiments)
        j["experiments"].push_back({{"id", e.id},
                                    {"seed", e.seed},
                                    {"category", e.category},
                                    {"intensity", e.intensity},
                                    {"malware_process", e.malware_process},
                                    {"injection_t_s", e.injection_t_s},
                                    {"snapshot_count", e.snapshot_count}});
    write_file_atomic(path, j.dump(2) + "\n");
}

Manifest read_manifest(const fs::path& path) {
    try {
        const json j = json::parse(read_file(path));
        if (j.value("format", "") != "cloudmd-manifest") throw FormatError("not a manifest: " + path.string());
        if (j.at("version").get<int>() != 1) throw VersionError("unsupported manifest version");
        Manifest m;
        m.base_seed = j.at("base_seed").get<std::uint64_t>();
        m.schema_hash = j.at("schema_hash").get<std::uint64_t>();
        for (const auto& e : j.at("experiments")) {
            ExperimentEntry x;
            x.id = e.at("id").get<std::uint32_t>();
            x.seed = e.at("seed").get<std::uint64_t>();
            x.category = e.at("category").get<std::string>();
            x.intensity = e.at("intensity").get<double>();
            x.malware_process = e.at("malware_process").get<std::string>();
            x.injection_t_s = e.at("injection_t_s").get<double>();
            x.snapshot_count = e.at("snapshot_count").get<std::uint64_t>();
            m.experiments.push_back(std::move(x));
        }
        return m;
    } catch (const json::exception& e) {
        throw FormatError("bad manifest " + path.string() + ": " + e.what());
    }
}

void reconcile(const Manifest& m, const Dataset& d) {
    std::map<std::uint32_t, std::uint64_t> declared, found;
    for (const auto& e : m.experiments)
        if (!declared.emplace(e.id, e.snapshot_count).second)
            throw StoreError("manifest repeats experiment id " + std::to_string(e.id));
    for (const auto& s : d.snapshots) ++found[s.experiment_id];
    if (m.schema_hash != d.schema.hash()) throw SchemaError("manifest schema hash differs from dataset");
    if (declared != found) throw StoreError("manifest snapshot counts do not match the dataset");
    if (declared.size() != d.experiment_count) throw StoreError("manifest experiment count differs from dataset header");
}

void write_split(const SplitFile& s, const fs::path& path) {
    json j{{"format", "cloudmd-split"},
           {"version", 1},
           {"seed", s.seed},
           {"ratios", {s.split.ratios.train, s.split.ratios.val, s.split.ratios.test}},
           {"train", s.split.train},
           {"val", s.split.val},
           {"test", s.split.test}};
    write_file_atomic(path, j.dump(2) + "\n");
}

SplitFile read_split(const fs::path& path) {
    try {
        const json j = json::parse(read_file(path));
        if (j.value("format", "") != "cloudmd-split") throw FormatError("not a split file: " + path.string());
        if (j.at("version").get<int>() != 1) throw VersionError("unsupported split version");
        SplitFile s;
        s.seed = j.at("seed").get<std::uint64_t>();
        const auto r = j.at("ratios").get<std::vector<double>>();
        if (r.size() != 3) throw FormatError("split ratios need three values");
        s.split.ratios = {r[0], r[1], r[2]};
        s.split.train = j.at("train").get<std::vector<std::uint32_t>>();
        s.split.val = j.at("val").get<std::vector<std::uint32_t>>();
        s.split.test = j.at("test").get<std::vector<std::uint32_t>>();
        return s;
    } catch (const json::exception& e) {
        throw FormatError("bad split file " + path.string() + ": " + e.what());
    }
}

// ---- models ----

std::string encode_model(const TrainedModel& m) {
    if (!m.model) throw DomainError("no model to encode");
    ByteWriter w;
    w.put_bytes(kModelMagic);
    w.put<std::uint32_t>(kModelVersion);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(m.model->kind()));
    w.put<std::uint64_t>(m.schema_hash);
    w.put_string(m.model->hyperparams().dump());
    w.put<std::uint32_t>(m.row_cap);
    w.put_vector(m.scaler.min);
    w.put_vector(m.scaler.max);
    ByteWriter payload;
    m.model->save_payload(payload);
    w.put<std::uint64_t>(payload.bytes().size());
    w.put_bytes(payload.bytes());
    return w.take();
}

TrainedModel decode_model(std::string_view bytes, std::optional<models::ModelKind> expected_kind,
                          std::optional<std::uint64_t> expected_schema_hash) {
    ByteReader r(bytes);
    if (r.get_bytes(4) != kModelMagic) throw FormatError("not a model file");
    const auto version = r.get<std::uint32_t>();
    if (version != kModelVersion) throw VersionError("model version " + std::to_string(version) + " unsupported");
    const auto kind = static_cast<models::ModelKind>(r.get<std::uint8_t>());
    try {
        models::to_string(kind);
    } catch (const DomainError&) {
        throw FormatError("unknown model kind in file");
    }
    if (expected_kind && *expected_kind != kind)
        throw KindMismatchError("model file holds " + models::to_string(kind) + ", expected " +
                                models::to_string(*expected_kind));
    TrainedModel m;
    m.schema_hash = r.get<std::uint64_t>();
    if (expected_schema_hash && *expected_schema_hash != m.schema_hash)
        throw SchemaError("model was trained on a different feature schema");
    json hp;
    try {
        hp = json::parse(r.get_string());
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad hyperparameters: ") + e.what());
    }
    try {
        m.model = models::make_classifier(kind, hp);
    } catch (const DomainError& e) {
        throw FormatError(std::string("bad hyperparameters: ") + e.what());
    }
    m.row_cap = r.get<std::uint32_t>();
    m.scaler.min = r.get_vector<double>();
    m.scaler.max = r.get_vector<double>();
    if (m.scaler.min.size() != m.scaler.max.size()) throw FormatError("scaler vectors differ in length");
    const auto n = r.get<std::uint64_t>();
    if (n != r.remaining()) throw TruncatedError("model payload size mismatch");
    ByteReader payload(r.get_bytes(n));
    m.model->load_payload(payload);
    if (!payload.done()) throw FormatError("trailing bytes in model payload");
    return m;
}

void save_model(const TrainedModel& m, const fs::path& path) { write_file_atomic(path, encode_model(m)); }

TrainedModel load_model(const fs::path& path, std::optional<models::ModelKind> expected_kind,
                        std::optional<std::uint64_t> expected_schema_hash) {
    return decode_model(read_file(path), expected_kind, expected_schema_hash);
}

}  // namespace cloudmd::datastore
