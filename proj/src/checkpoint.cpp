#include "hyperot/checkpoint.hpp"

#include <cstdint>
#include <cstring>

#include <json.hpp>

#include "hyperot/errors.hpp"
#include "hyperot/io.hpp"

namespace hyperot {

namespace {
const char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(const unsigned char* data, std::size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        const unsigned b0 = data[i];
        const unsigned b1 = i + 1 < len ? data[i + 1] : 0;
        const unsigned b2 = i + 2 < len ? data[i + 2] : 0;
        out.push_back(kB64Alphabet[b0 >> 2]);
        out.push_back(kB64Alphabet[((b0 & 0x3) << 4) | (b1 >> 4)]);
        out.push_back(i + 1 < len ? kB64Alphabet[((b1 & 0xF) << 2) | (b2 >> 6)] : '=');
        out.push_back(i + 2 < len ? kB64Alphabet[b2 & 0x3F] : '=');
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    int lut[256];
    for (auto& v : lut) v = -1;
    for (int i = 0; i < 64; ++i) lut[static_cast<unsigned char>(kB64Alphabet[i])] = i;
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    int acc = 0, bits = 0;
    for (const char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        const int v = lut[static_cast<unsigned char>(c)];
        if (v < 0) throw ValidationError("base64: invalid character");
        acc = (acc << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((acc >> bits) & 0xFF));
        }
    }
    return out;
}

namespace {

// Doubles go through an explicit little-endian byte layout so files are
// identical across hosts.
std::string encode_doubles(const std::vector<double>& v) {
    std::vector<unsigned char> bytes(v.size() * 8);
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &v[i], 8);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    return base64_encode(bytes.data(), bytes.size());
}

std::vector<double> decode_doubles(const std::string& text) {
    const auto bytes = base64_decode(text);
    if (bytes.size() % 8 != 0) throw ValidationError("checkpoint: payload is not 8-byte aligned");
    std::vector<double> out(bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
        std::memcpy(&out[i], &bits, 8);
    }
    return out;
}

}  // namespace

std::string Checkpoint::to_json() const {
    nlohmann::json doc;
    doc["version"] = 1;
    nlohmann::json arrays_json = nlohmann::json::object();
    for (const auto& [name, tensor] : arrays) {
        nlohmann::json entry;
        entry["shape"] = tensor.shape();
        entry["data"] = encode_doubles(tensor.values());
        arrays_json[name] = std::move(entry);
    }
    doc["arrays"] = std::move(arrays_json);
    return doc.dump();
}

Checkpoint Checkpoint::from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("checkpoint: invalid JSON: ") + e.what());
    }
    if (!doc.contains("version") || doc["version"].get<int>() != 1) {
        throw ValidationError("checkpoint: unsupported version");
    }
    Checkpoint ckpt;
    for (const auto& [name, entry] : doc.at("arrays").items()) {
        Shape shape = entry.at("shape").get<Shape>();
        std::vector<double> data = decode_doubles(entry.at("data").get<std::string>());
        if (shape_numel(shape) != data.size()) {
            throw ValidationError("checkpoint: array " + name + " shape/data mismatch");
        }
        ckpt.arrays.emplace(name, Tensor(std::move(shape), std::move(data)));
    }
    return ckpt;
}

void Checkpoint::save(const std::string& path) const { atomic_write_file(path, to_json()); }

Checkpoint Checkpoint::load(const std::string& path) { return from_json(read_file(path)); }

const Tensor& Checkpoint::get(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw ValidationError("checkpoint: missing array " + name);
    return it->second;
}

std::string Checkpoint::checksum() const {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto mix = [&h](const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 0x100000001B3ULL;
        }
    };
    for (const auto& [name, tensor] : arrays) {  // std::map: fixed name order
        mix(name.data(), name.size());
        mix(tensor.values().data(), tensor.values().size() * 8);
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace hyperot
