#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <vector>

#include <json.hpp>

#include "edgefaas/proxy/rules.hpp"
#include "edgefaas/store/digest.hpp"

namespace edgefaas::store {

// Everything a target node needs to restore an archive besides the blob:
// identity, required base image, wake rules and provenance.
struct Manifest {
  std::string function_id;
  std::string instance_id;
  std::string image_digest;
  std::vector<proxy::WakeRule> wake_rules;
  SimTime created_at{};
  std::string origin_node;
  int format_version = 1;
  std::string digest_algo = kDigestAlgo;

  nlohmann::json to_json() const;
  static Manifest from_json(const nlohmann::json& j);

  // Sorted keys, no insignificant whitespace: the bytes the checksum and
  // archive_id are computed over.
  std::string canonical() const;
};

struct Archive {
  std::string archive_id;  // hex of the checksum (content addressing)
  Manifest manifest;
  Bytes state_blob;
  Digest checksum{};
};

std::string archive_id_for(const Manifest& manifest, const Bytes& blob);

// On-disk layout: <root>/archives/<archive_id>/{manifest.json, state.bin,
// checksum}. Writes are temp-dir + rename; identical content is
// deduplicated by construction. Archives that fail verification are moved
// to <root>/quarantine and never returned.
class CheckpointStore {
 public:
  explicit CheckpointStore(std::filesystem::path root);

  std::string write_archive(const Manifest& manifest, const Bytes& blob);
  Archive read_archive(const std::string& archive_id);
  bool contains(const std::string& archive_id) const;
  void remove(const std::string& archive_id);
  std::vector<std::string> list() const;

  struct BackupItem {
    Manifest manifest;
    Bytes blob;
  };

  // Writes a backup archive for every item whose instance has not been
  // backed up within `interval`. Per-item failures are recorded and do
  // not abort the tick.
  std::vector<std::string> backup_tick(const std::vector<BackupItem>& items,
                                       SimTime now, SimTime interval);

  // Keeps the newest `retain_latest` archives per (function, instance);
  // pinned archives survive regardless of age. Returns removed count.
  std::size_t gc(int retain_latest, const std::set<std::string>& pinned = {});

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path archive_dir(const std::string& id) const;
  void quarantine(const std::string& archive_id);

  std::filesystem::path root_;
  std::map<std::string, SimTime> last_backup_;  // instance_id -> time
};

}  // namespace edgefaas::store
