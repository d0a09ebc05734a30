#include "edgefaas/store/store.hpp"

#include <fstream>

namespace edgefaas::store {

namespace fs = std::filesystem;

nlohmann::json Manifest::to_json() const {
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& r : wake_rules) rules.push_back(proxy::rule_to_json(r));
  return {{"function_id", function_id},
          {"instance_id", instance_id},
          {"image_digest", image_digest},
          {"wake_rules", rules},
          {"created_at_us", created_at.us},
          {"origin_node", origin_node},
          {"format_version", format_version},
          {"digest_algo", digest_algo}};
}

Manifest Manifest::from_json(const nlohmann::json& j) {
  Manifest m;
  m.function_id = j.at("function_id").get<std::string>();
  m.instance_id = j.at("instance_id").get<std::string>();
  m.image_digest = j.at("image_digest").get<std::string>();
  for (const auto& r : j.at("wake_rules"))
    m.wake_rules.push_back(proxy::rule_from_json(r));
  m.created_at = SimTime::from_us(j.at("created_at_us").get<std::int64_t>());
  m.origin_node = j.at("origin_node").get<std::string>();
  m.format_version = j.at("format_version").get<int>();
  m.digest_algo = j.at("digest_algo").get<std::string>();
  if (m.format_version != 1)
    fail(Errc::CorruptSnapshot,
         "unknown manifest format_version " + std::to_string(m.format_version));
  if (m.digest_algo != kDigestAlgo)
    fail(Errc::ChecksumMismatch, "unknown digest algo " + m.digest_algo);
  return m;
}

std::string Manifest::canonical() const {
  // nlohmann::json objects iterate keys in sorted order; dump() emits no
  // insignificant whitespace.
  return to_json().dump();
}

std::string archive_id_for(const Manifest& manifest, const Bytes& blob) {
  const std::string m = manifest.canonical();
  return hex(sha256({reinterpret_cast<const std::uint8_t*>(m.data()), m.size()},
                    blob));
}

namespace {

Bytes read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(Errc::IoFailure, "cannot read " + p.string());
  return Bytes(std::istreambuf_iterator<char>(in),
               std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, std::span<const std::uint8_t> data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoFailure, "cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) {
    std::error_code ec;
    auto space = fs::space(p.parent_path(), ec);
    if (!ec && space.available == 0)
      fail(Errc::StorageFull, "no space writing " + p.string());
    fail(Errc::IoFailure, "short write to " + p.string());
  }
}

void write_file(const fs::path& p, const std::string& s) {
  write_file(p, {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

}  // namespace

CheckpointStore::CheckpointStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "archives");
  fs::create_directories(root_ / "quarantine");
  fs::create_directories(root_ / "tmp");
}

fs::path CheckpointStore::archive_dir(const std::string& id) const {
  return root_ / "archives" / id;
}

std::string CheckpointStore::write_archive(const Manifest& manifest,
                                           const Bytes& blob) {
  if (blob.empty()) fail(Errc::IoFailure, "refusing to write empty blob");
  const std::string id = archive_id_for(manifest, blob);
  const fs::path final_dir = archive_dir(id);
  if (fs::exists(final_dir)) return id;  // content-addressed: already stored

  const fs::path tmp = root_ / "tmp" / (id + ".partial");
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp);
  write_file(tmp / "manifest.json", manifest.canonical());
  write_file(tmp / "state.bin", blob);
  write_file(tmp / "checksum", id + "\n");
  fs::rename(tmp, final_dir, ec);
  if (ec) {
    // A concurrent writer may have won the rename; same content either way.
    if (fs::exists(final_dir)) {
      fs::remove_all(tmp, ec);
      return id;
    }
    fail(Errc::IoFailure, "rename failed: " + ec.message());
  }
  return id;
}

Archive CheckpointStore::read_archive(const std::string& archive_id) {
  const fs::path dir = archive_dir(archive_id);
  if (!fs::exists(dir))
    fail(Errc::NotFound, "archive " + archive_id + " not found");

  Bytes manifest_bytes;
  Bytes blob;
  std::string stored;
  try {
    manifest_bytes = read_file(dir / "manifest.json");
    blob = read_file(dir / "state.bin");
    std::string checksum_text = to_string(read_file(dir / "checksum"));
    while (!checksum_text.empty() &&
           (checksum_text.back() == '\n' || checksum_text.back() == '\r'))
      checksum_text.pop_back();
    stored = checksum_text;
  } catch (const Error&) {
    quarantine(archive_id);
    throw;
  }

  const Digest computed = sha256(manifest_bytes, blob);
  if (hex(computed) != stored || hex(computed) != archive_id) {
    quarantine(archive_id);
    fail(Errc::ChecksumMismatch,
         "archive " + archive_id + " failed verification, quarantined");
  }

  Archive a;
  a.archive_id = archive_id;
  a.checksum = computed;
  a.state_blob = std::move(blob);
  try {
    a.manifest =
        Manifest::from_json(nlohmann::json::parse(to_string(manifest_bytes)));
  } catch (const nlohmann::json::exception& e) {
    quarantine(archive_id);
    fail(Errc::ChecksumMismatch,
         "archive " + archive_id + " manifest unparseable: " + e.what());
  }
  return a;
}

void CheckpointStore::quarantine(const std::string& archive_id) {
  std::error_code ec;
  fs::path src = archive_dir(archive_id);
  fs::path dst = root_ / "quarantine" / archive_id;
  int n = 0;
  while (fs::exists(dst, ec)) dst = root_ / "quarantine" / (archive_id + "." + std::to_string(++n));
  fs::rename(src, dst, ec);
}

bool CheckpointStore::contains(const std::string& archive_id) const {
  return fs::exists(archive_dir(archive_id));
}

void CheckpointStore::remove(const std::string& archive_id) {
  std::error_code ec;
  fs::remove_all(archive_dir(archive_id), ec);
  if (ec) fail(Errc::IoFailure, "remove failed: " + ec.message());
}

std::vector<std::string> CheckpointStore::list() const {
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(root_ / "archives"))
    if (e.is_directory()) ids.push_back(e.path().filename().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<std::string> CheckpointStore::backup_tick(
    const std::vector<BackupItem>& items, SimTime now, SimTime interval) {
  if (interval.us <= 0) fail(Errc::ConfigError, "backup interval must be > 0");
  std::vector<std::string> written;
  for (const BackupItem& item : items) {
    auto it = last_backup_.find(item.manifest.instance_id);
    if (it != last_backup_.end() && now - it->second < interval) continue;
    try {
      written.push_back(write_archive(item.manifest, item.blob));
      last_backup_[item.manifest.instance_id] = now;
    } catch (const Error&) {
      // per-instance failure must not starve the rest of the tick
      continue;
    }
  }
  return written;
}

std::size_t CheckpointStore::gc(int retain_latest,
                                const std::set<std::string>& pinned) {
  if (retain_latest < 1)
    fail(Errc::ConfigError, "gc retain_latest must be >= 1");

  struct Entry {
    SimTime created;
    std::string id;
  };
  std::map<std::pair<std::string, std::string>, std::vector<Entry>> groups;
  for (const std::string& id : list()) {
    try {
      Bytes mb = read_file(archive_dir(id) / "manifest.json");
      Manifest m = Manifest::from_json(nlohmann::json::parse(to_string(mb)));
      groups[{m.function_id, m.instance_id}].push_back({m.created_at, id});
    } catch (const std::exception&) {
      continue;  // unreadable manifests are left alone; reads will quarantine
    }
  }

  std::size_t removed = 0;
  for (auto& [key, entries] : groups) {
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return std::tie(a.created.us, a.id) > std::tie(b.created.us, b.id);
    });
    for (size_t i = retain_latest; i < entries.size(); ++i) {
      if (pinned.count(entries[i].id)) continue;
      std::error_code ec;
      fs::remove_all(archive_dir(entries[i].id), ec);
      if (ec) fail(Errc::IoFailure, "gc remove failed: " + ec.message());
      ++removed;
    }
  }
  return removed;
}

}  // namespace edgefaas::store
