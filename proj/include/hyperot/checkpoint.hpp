#pragma once

#include <map>
#include <string>

#include "hyperot/tensor.hpp"

namespace hyperot {

// Versioned JSON container for named tensors:
//   {"version": 1, "arrays": {name: {"shape": [...], "data": "<base64>"}}}
// where data holds the raw little-endian 64-bit reals.
struct Checkpoint {
    std::map<std::string, Tensor> arrays;

    std::string to_json() const;
    static Checkpoint from_json(const std::string& text);

    void save(const std::string& path) const;  // atomic (temp + rename)
    static Checkpoint load(const std::string& path);

    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const { return arrays.count(name) > 0; }

    // FNV-1a over names and payload bytes; identifies a parameter snapshot.
    std::string checksum() const;
};

std::string base64_encode(const unsigned char* data, std::size_t len);
std::vector<unsigned char> base64_decode(const std::string& text);

}  // namespace hyperot
