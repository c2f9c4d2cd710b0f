#pragma once

// Versioned JSON model files:
//   {"version":1,"dim":2,"kernel":{"eta":..,"gamma":..},
//    "positives":[{"p":[x,y],"w":..}],"negatives":[...]}

#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "skm/errors.hpp"
#include "skm/kernel_model.hpp"

namespace skm {

inline constexpr int kModelFormatVersion = 1;

template <int Dim>
nlohmann::json model_to_json(const SupportVectorModel<Dim>& m) {
  nlohmann::json j;
  j["version"] = kModelFormatVersion;
  j["dim"] = Dim;
  j["kernel"] = {{"eta", m.kernel_params().eta}, {"gamma", m.kernel_params().gamma}};
  auto dump_class = [](const ClassIndex<Dim>& idx) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : idx.sorted_entries()) {
      nlohmann::json p = nlohmann::json::array();
      for (int i = 0; i < Dim; ++i) p.push_back(v.position[i]);
      arr.push_back({{"p", std::move(p)}, {"w", v.weight}});
    }
    return arr;
  };
  j["positives"] = dump_class(m.positives());
  j["negatives"] = dump_class(m.negatives());
  return j;
}

template <int Dim>
SupportVectorModel<Dim> model_from_json(const nlohmann::json& j, std::optional<ApproxK> approx = ApproxK{}) {
  try {
    if (!j.is_object()) throw ParseError("model document must be a JSON object");
    if (!j.contains("version") || j.at("version").get<int>() != kModelFormatVersion)
      throw ParseError("unsupported model format version");
    if (j.at("dim").get<int>() != Dim)
      throw ParseError("model dimension " + std::to_string(j.at("dim").get<int>()) + " does not match " +
                       std::to_string(Dim));
    KernelParams kp{j.at("kernel").at("eta").get<double>(), j.at("kernel").at("gamma").get<double>()};
    try {
      kp.validate();
    } catch (const InvalidArgumentError& e) {
      throw ParseError(std::string("invalid kernel parameters: ") + e.what());
    }
    SupportVectorModel<Dim> m(kp, approx);
    auto load_class = [&](const char* key, Label label) {
      for (const auto& e : j.at(key)) {
        const auto& p = e.at("p");
        if (!p.is_array() || p.size() != static_cast<std::size_t>(Dim))
          throw ParseError("support vector position has wrong dimension");
        Point<Dim> x;
        for (int i = 0; i < Dim; ++i) x[i] = p.at(i).get<double>();
        const double w = e.at("w").get<double>();
        if (!(w > 0.0) || !std::isfinite(w)) throw ParseError("support vector weight must be finite and > 0");
        if (!x.allFinite()) throw ParseError("support vector position must be finite");
        try {
          m.add(label, x, w);
        } catch (const DuplicateEntryError& err) {
          throw ParseError(std::string("duplicate support vector: ") + err.what());
        }
      }
    };
    load_class("positives", Label::Occupied);
    load_class("negatives", Label::Free);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model document: ") + e.what());
  }
}

template <int Dim>
std::string serialize(const SupportVectorModel<Dim>& m) {
  return model_to_json(m).dump();
}

template <int Dim>
SupportVectorModel<Dim> deserialize(const std::string& bytes, std::optional<ApproxK> approx = ApproxK{}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model stream is not valid JSON: ") + e.what());
  }
  return model_from_json<Dim>(j, approx);
}

template <int Dim>
void save_model(const SupportVectorModel<Dim>& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open model file for writing: " + path);
  out << serialize(m) << '\n';
  if (!out) throw Error("failed writing model file: " + path);
}

template <int Dim>
SupportVectorModel<Dim> load_model(const std::string& path, std::optional<ApproxK> approx = ApproxK{}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open model file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize<Dim>(bytes, approx);
}

}  // namespace skm
