#pragma once

// JSON and CSV serialization plus path-tracking config access.

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pidcert/certificates.hpp"
#include "pidcert/errors.hpp"
#include "pidcert/simulator.hpp"

namespace pidcert {

using Json = nlohmann::ordered_json;

/// A config problem located by its JSON path ("$.sweep.gains[2].kp") or by
/// line and column for syntax errors.
class ConfigError : public UsageError {
 public:
  ConfigError(const std::string& where, const std::string& what) : UsageError(where + ": " + what) {}
};

/// Parses a file; syntax errors report line and column.
Json load_json_file(const std::string& path);
Json parse_json_text(const std::string& text, const std::string& source = "<string>");

/// Read-only view of a JSON value that remembers where it came from.
class ConfigNode {
 public:
  ConfigNode(const Json& j, std::string path = "$") : j_(&j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const Json& raw() const { return *j_; }

  bool has(const std::string& key) const;
  ConfigNode at(const std::string& key) const;
  std::optional<ConfigNode> find(const std::string& key) const;
  std::vector<ConfigNode> items() const;
  std::vector<std::string> keys() const;

  bool is_array() const { return j_->is_array(); }
  bool is_object() const { return j_->is_object(); }
  bool is_number() const { return j_->is_number(); }
  bool is_string() const { return j_->is_string(); }

  double number() const;
  double positive() const;
  double non_negative() const;
  std::int64_t integer() const;
  std::uint64_t seed() const;
  bool boolean() const;
  std::string str() const;
  /// A number (length-1 vector) or an array of numbers.
  Vec vector() const;
  /// A number (1×1) or an array of equal-length rows.
  Mat matrix() const;

  double number_or(const std::string& key, double fallback) const;
  std::int64_t integer_or(const std::string& key, std::int64_t fallback) const;
  bool boolean_or(const std::string& key, bool fallback) const;
  std::string str_or(const std::string& key, const std::string& fallback) const;

  [[noreturn]] void fail(const std::string& what) const;

  /// Raises on keys outside `allowed`.
  void only(std::initializer_list<const char*> allowed) const;

 private:
  const Json* j_;
  std::string path_;
};

/// %.17g: round-trips every double and is locale-independent.
std::string format_double(double v);

Json to_json(const GainVector& g);
Json to_json(const UncertaintyBounds& ub);
Json to_json(const MembershipReport& r);
Json to_json(const LyapunovCertificate& c);
Json to_json(const AuditReport& r);
Json to_json(const MonitorReport& r);
Json to_json(const DecayFit& f);
Json vector_json(const Vec& v);

/// Gains {kp, ki, kd} for the given kind; missing ki/kd are errors where
/// the kind needs them.
GainVector parse_gains(const ConfigNode& node, ControllerKind kind);
/// {L1, L2, b} for second order or {L, b} for first order.
UncertaintyBounds parse_bounds(const ConfigNode& node, PlantOrder order);

/// Inverse of to_json(LyapunovCertificate). P is rebuilt from the gains;
/// alpha, M and lambda are taken verbatim.
LyapunovCertificate certificate_from_json(const ConfigNode& node);

/// Columns: t, x…, e…, edot…, u…, V, envelope_margin. V and envelope_margin
/// are empty when the run had no certificate.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace pidcert
