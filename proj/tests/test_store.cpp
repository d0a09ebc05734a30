#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "edgefaas/store/store.hpp"
#include "util.hpp"

using namespace edgefaas;
using namespace edgefaas::store;
using testutil::Rng;
using testutil::TempDir;

namespace {

Manifest manifest_for(const std::string& fn, const std::string& inst,
                      double created_s = 0) {
  Manifest m;
  m.function_id = fn;
  m.instance_id = inst;
  m.image_digest = "img-" + fn;
  m.created_at = SimTime::from_seconds(created_s);
  m.origin_node = "A";
  return m;
}

}  // namespace

TEST_CASE("write/read round-trip with verified checksum") {
  TempDir dir;
  CheckpointStore store(dir.path);
  const Bytes blob = to_bytes("state-bytes");
  const auto id = store.write_archive(manifest_for("f", "i1"), blob);
  CHECK(id.size() == 64);

  auto archive = store.read_archive(id);
  CHECK(archive.archive_id == id);
  CHECK(archive.state_blob == blob);
  CHECK(archive.manifest.function_id == "f");
  CHECK(hex(archive.checksum) == id);
}

TEST_CASE("content addressing: identical writes dedupe, different bytes differ") {
  TempDir dir;
  CheckpointStore store(dir.path);
  const auto m = manifest_for("f", "i1");
  const auto id1 = store.write_archive(m, to_bytes("same"));
  const auto id2 = store.write_archive(m, to_bytes("same"));
  CHECK(id1 == id2);
  CHECK(store.list().size() == 1);

  Bytes other = to_bytes("same");
  other[0] ^= 1;
  const auto id3 = store.write_archive(m, other);
  CHECK(id3 != id1);
  CHECK(store.list().size() == 2);
}

TEST_CASE("unknown archive reads are NotFound; empty blobs rejected") {
  TempDir dir;
  CheckpointStore store(dir.path);
  CHECK_THROWS_AS(store.read_archive(std::string(64, 'a')), Error);
  CHECK_THROWS_AS(store.write_archive(manifest_for("f", "i"), {}), Error);
}

TEST_CASE("single corrupted byte is always detected and quarantined") {
  TempDir dir;
  CheckpointStore store(dir.path);
  Rng rng(5);
  int detected = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    Bytes blob = rng.bytes(static_cast<size_t>(rng.range(16, 400)));
    const auto id =
        store.write_archive(manifest_for("f", "i" + std::to_string(t)), blob);

    // flip one random byte in one of the three files
    static const char* files[] = {"manifest.json", "state.bin", "checksum"};
    const auto* victim = files[rng.range(0, 2)];
    const auto path = dir.path / "archives" / id / victim;
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    REQUIRE(f);
    f.seekg(0, std::ios::end);
    const auto size = static_cast<std::int64_t>(f.tellg());
    REQUIRE(size > 0);
    const auto pos = rng.range(0, size - 1);
    f.seekg(pos);
    char c = 0;
    f.read(&c, 1);
    c = static_cast<char>(c ^ 0x20);  // guaranteed different byte
    f.seekp(pos);
    f.write(&c, 1);
    f.close();

    try {
      store.read_archive(id);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ChecksumMismatch);
      ++detected;
    }
    CHECK_FALSE(store.contains(id));  // quarantined, never restorable
  }
  CHECK(detected == trials);
}

TEST_CASE("reindex after restart: a fresh store over the same root reads back") {
  TempDir dir;
  std::string id;
  {
    CheckpointStore store(dir.path);
    id = store.write_archive(manifest_for("f", "i1"), to_bytes("persist"));
  }
  CheckpointStore store2(dir.path);
  auto archive = store2.read_archive(id);
  CHECK(to_string(archive.state_blob) == "persist");
  CHECK(store2.list() == std::vector<std::string>{id});
}

TEST_CASE("backup_tick rate-limits per instance and tolerates failures") {
  TempDir dir;
  CheckpointStore store(dir.path);
  const SimTime interval = SimTime::from_seconds(10);

  std::vector<CheckpointStore::BackupItem> items;
  items.push_back({manifest_for("f", "i1", 0), to_bytes("one")});
  items.push_back({manifest_for("g", "i2", 0), to_bytes("two")});

  auto first = store.backup_tick(items, SimTime::from_seconds(0), interval);
  CHECK(first.size() == 2);

  // within the interval: nothing
  items[0].manifest.created_at = SimTime::from_seconds(5);
  items[1].manifest.created_at = SimTime::from_seconds(5);
  CHECK(store.backup_tick(items, SimTime::from_seconds(5), interval).empty());

  // past the interval: both again (changed content -> new archives)
  items[0].manifest.created_at = SimTime::from_seconds(10);
  items[1].manifest.created_at = SimTime::from_seconds(10);
  CHECK(store.backup_tick(items, SimTime::from_seconds(10), interval).size() == 2);

  CHECK(store.backup_tick({}, SimTime::from_seconds(20), interval).empty());
  CHECK_THROWS_AS(store.backup_tick({}, {}, SimTime{}), Error);
}

TEST_CASE("gc keeps the newest per instance and honors pins") {
  TempDir dir;
  CheckpointStore store(dir.path);
  std::vector<std::string> ids;
  for (int i = 0; i < 3; ++i) {
    ids.push_back(store.write_archive(manifest_for("f", "i1", i),
                                      to_bytes("v" + std::to_string(i))));
  }
  SUBCASE("retain 1 removes the two older") {
    CHECK(store.gc(1) == 2);
    CHECK(store.list() == std::vector<std::string>{ids[2]});
    CHECK(store.gc(1) == 0);  // idempotent
  }
  SUBCASE("a pinned old archive survives regardless of age") {
    CHECK(store.gc(1, {ids[0]}) == 1);  // only ids[1] removed
    auto left = store.list();
    CHECK(std::find(left.begin(), left.end(), ids[0]) != left.end());
    CHECK(std::find(left.begin(), left.end(), ids[2]) != left.end());
  }
  SUBCASE("retain must be >= 1") {
    CHECK_THROWS_AS(store.gc(0), Error);
  }
}

TEST_CASE("manifest canonical form is stable and digests are exact") {
  Manifest m = manifest_for("fn", "inst", 3);
  m.wake_rules.push_back(proxy::TimerRule{SimTime::from_seconds(60), "inst"});
  const std::string c1 = m.canonical();
  const std::string c2 = Manifest::from_json(nlohmann::json::parse(c1)).canonical();
  CHECK(c1 == c2);

  // digest pinned against a known vector: sha256("abc")
  const Digest d = sha256(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>("abc"), 3));
  CHECK(hex(d) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(from_hex(hex(d)) == d);
}

TEST_CASE("archive id is the digest of manifest plus blob") {
  Manifest m = manifest_for("fn", "inst");
  const Bytes blob = to_bytes("blob");
  const std::string c = m.canonical();
  Bytes joined(c.begin(), c.end());
  joined.insert(joined.end(), blob.begin(), blob.end());
  CHECK(archive_id_for(m, blob) == hex(sha256(joined)));
}
