#include "san/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "san/log.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian");

namespace san {

namespace {

using nlohmann::json;

void write_blob(const std::string& path, const std::vector<double>& buf) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("checkpoint: cannot write " + path);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(double)));
    if (!out) throw DataError("checkpoint: short write to " + path);
}

std::vector<double> read_blob(const std::string& path, std::size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot read " + path);
    std::vector<double> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
        throw DataError("checkpoint: truncated blob " + path);
    return buf;
}

json manifest_for(const std::vector<std::string>& names,
                  const std::vector<Shape>& shapes,
                  const std::vector<std::size_t>& counts,
                  const std::string& meta_json) {
    json tensors = json::array();
    std::size_t offset = 0;
    for (std::size_t i = 0; i < names.size(); ++i) {
        json t;
        t["name"] = names[i];
        t["shape"] = shapes[i];
        t["dtype"] = "float64";
        t["offset_bytes"] = offset;
        t["num_elements"] = counts[i];
        tensors.push_back(std::move(t));
        offset += counts[i] * sizeof(double);
    }
    json m;
    m["format"] = "san-checkpoint-v1";
    m["byte_order"] = "little";
    m["tensors"] = std::move(tensors);
    m["meta"] = meta_json.empty() ? json::object() : json::parse(meta_json);
    return m;
}

}  // namespace

void save_checkpoint(const std::string& prefix, const ParamSet& params,
                     const std::string& meta_json) {
    std::vector<std::string> names = params.names();
    std::vector<Shape> shapes;
    std::vector<std::size_t> counts;
    std::vector<double> blob;
    blob.reserve(params.total_elements());
    for (const auto& name : names) {
        const Tensor& t = params.get(name);
        shapes.push_back(t.shape());
        counts.push_back(t.size());
        blob.insert(blob.end(), t.value().begin(), t.value().end());
    }

    json manifest = manifest_for(names, shapes, counts, meta_json);
    // Frozen-row info rides along so a reloaded model trains identically.
    json frozen = json::object();
    for (const auto& name : names) {
        const auto* mask = params.frozen_rows(name);
        if (!mask) continue;
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < mask->size(); ++i)
            if ((*mask)[i]) rows.push_back(i);
        frozen[name] = rows;
    }
    manifest["frozen_rows"] = std::move(frozen);

    std::ofstream mf(prefix + ".json");
    if (!mf) throw DataError("checkpoint: cannot write " + prefix + ".json");
    mf << manifest.dump(2) << "\n";
    write_blob(prefix + ".bin", blob);
}

LoadedCheckpoint load_checkpoint(const std::string& prefix, Graph& g) {
    std::ifstream mf(prefix + ".json");
    if (!mf) throw DataError("checkpoint: cannot read " + prefix + ".json");
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw ParseError(strf("checkpoint manifest %s.json: %s",
                              prefix.c_str(), e.what()));
    }
    if (manifest.value("format", "") != "san-checkpoint-v1")
        throw ParseError("checkpoint: unknown format in " + prefix + ".json");

    std::size_t total = 0;
    for (const auto& t : manifest["tensors"])
        total += t["num_elements"].get<std::size_t>();
    std::vector<double> blob = read_blob(prefix + ".bin", total);

    LoadedCheckpoint out;
    for (const auto& t : manifest["tensors"]) {
        const std::string name = t["name"].get<std::string>();
        Shape shape = t["shape"].get<Shape>();
        const std::size_t off =
            t["offset_bytes"].get<std::size_t>() / sizeof(double);
        const std::size_t count = t["num_elements"].get<std::size_t>();
        std::vector<double> vals(blob.begin() + static_cast<long>(off),
                                 blob.begin() + static_cast<long>(off + count));
        out.params.add(name, g.leaf(std::move(shape), std::move(vals), true));
    }
    if (manifest.contains("frozen_rows")) {
        for (auto it = manifest["frozen_rows"].begin();
             it != manifest["frozen_rows"].end(); ++it) {
            const Tensor& t = out.params.get(it.key());
            std::vector<std::uint8_t> mask(t.dim(0), 0);
            for (const auto& r : it.value())
                mask.at(r.get<std::size_t>()) = 1;
            out.params.set_frozen_rows(it.key(), std::move(mask));
        }
    }
    out.meta_json = manifest["meta"].dump();
    return out;
}

void save_tensor_map(
    const std::string& prefix,
    const std::map<std::string, std::pair<Shape, std::vector<double>>>&
        tensors) {
    std::vector<std::string> names;
    std::vector<Shape> shapes;
    std::vector<std::size_t> counts;
    std::vector<double> blob;
    for (const auto& [name, entry] : tensors) {
        names.push_back(name);
        shapes.push_back(entry.first);
        counts.push_back(entry.second.size());
        blob.insert(blob.end(), entry.second.begin(), entry.second.end());
    }
    json manifest = manifest_for(names, shapes, counts, "");
    std::ofstream mf(prefix + ".json");
    if (!mf) throw DataError("tensor map: cannot write " + prefix + ".json");
    mf << manifest.dump(2) << "\n";
    write_blob(prefix + ".bin", blob);
}

std::map<std::string, std::pair<Shape, std::vector<double>>> load_tensor_map(
    const std::string& prefix) {
    std::ifstream mf(prefix + ".json");
    if (!mf) throw DataError("tensor map: cannot read " + prefix + ".json");
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw ParseError(strf("tensor map %s.json: %s", prefix.c_str(),
                              e.what()));
    }
    std::size_t total = 0;
    for (const auto& t : manifest["tensors"])
        total += t["num_elements"].get<std::size_t>();
    std::vector<double> blob = read_blob(prefix + ".bin", total);

    std::map<std::string, std::pair<Shape, std::vector<double>>> out;
    for (const auto& t : manifest["tensors"]) {
        const std::string name = t["name"].get<std::string>();
        Shape shape = t["shape"].get<Shape>();
        const std::size_t off =
            t["offset_bytes"].get<std::size_t>() / sizeof(double);
        const std::size_t count = t["num_elements"].get<std::size_t>();
        out[name] = {std::move(shape),
                     std::vector<double>(
                         blob.begin() + static_cast<long>(off),
                         blob.begin() + static_cast<long>(off + count))};
    }
    return out;
}

}  // namespace san
