#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "nocs/metrics/metrics.hpp"

namespace nocs {

/// Every section is optional so partial evaluations still produce a report.
struct EvalReport {
  std::optional<NocsEvalResult> nocs;
  std::optional<LocalizationEvalResult> localization;
  std::optional<OrientationEvalResult> orientation;
  std::optional<MapResult> map;
};

namespace report_detail {

using nlohmann::json;

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

inline json to_json(const NocsEvalResult& r) {
  json cats = json::array();
  for (const auto& [name, c] : r.per_category)
    cats.push_back({{"category", name},
                    {"mae", opt(c.mae)},
                    {"psnr", opt(c.psnr)},
                    {"mask_iou", c.mask_iou},
                    {"count", c.count},
                    {"scored", c.scored}});
  return {{"aggregate",
           {{"mae", opt(r.mae)}, {"psnr", opt(r.psnr)}, {"mask_iou", r.mask_iou}, {"count", r.count}, {"absent", r.absent}}},
          {"categories", cats}};
}

inline json to_json(const LocalizationEvalResult& r) {
  json cats = json::array();
  for (const auto& [name, c] : r.per_category)
    cats.push_back({{"category", name}, {"ATE", c.ate}, {"AOE", c.aoe}, {"ASE", c.ase}, {"IoU3D", c.iou}, {"count", c.count}});
  return {{"aggregate", {{"mATE", r.mATE}, {"mAOE", r.mAOE}, {"mASE", r.mASE}, {"mIoU3D", r.mIoU3D}, {"count", r.count}}},
          {"categories", cats}};
}

inline json to_json(const OrientationEvalResult& r) {
  json cats = json::array();
  for (const auto& [name, c] : r.per_category)
    cats.push_back({{"category", name}, {"gravity", c.gravity}, {"heading", c.heading}, {"count", c.count}});
  return {{"thresholds", {{"gravity_deg", r.thresholds.gravity_deg}, {"heading_deg", r.thresholds.heading_deg}}},
          {"aggregate", {{"gravity", r.overall.gravity}, {"heading", r.overall.heading}, {"count", r.overall.count}}},
          {"categories", cats}};
}

inline json to_json(const MapResult& r) {
  json cats = json::array();
  for (const auto& [name, ap] : r.per_category) cats.push_back({{"category", name}, {"ap", ap}});
  return {{"thresholds", r.thresholds}, {"scored", r.scored}, {"aggregate", {{"map", r.map}, {"missed", r.missed}}}, {"categories", cats}};
}

}  // namespace report_detail

inline nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json j = nlohmann::json::object();
  if (r.nocs) j["nocs"] = report_detail::to_json(*r.nocs);
  if (r.localization) j["localization"] = report_detail::to_json(*r.localization);
  if (r.orientation) j["orientation"] = report_detail::to_json(*r.orientation);
  if (r.map) j["map"] = report_detail::to_json(*r.map);
  return j;
}

/// Deterministic text form: sorted keys, two-space indentation, trailing newline.
inline std::string write_report(const EvalReport& r) { return report_json(r).dump(2) + "\n"; }

/// Parses a report and checks that each present section has its aggregate record.
inline nlohmann::json parse_report(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::SchemaViolation, std::string("report is not valid: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::SchemaViolation, "report must be an object");
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object() || !body.contains("aggregate") || !body.contains("categories"))
      fail(ErrorCode::SchemaViolation, "report section '" + section + "' lacks aggregate/categories");
  }
  return j;
}

}  // namespace nocs
