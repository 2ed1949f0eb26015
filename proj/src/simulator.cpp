// SPDX-License-Identifier: Apache-2.0

#include "cloudmd/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cloudmd::sim {

namespace {

constexpr double kMiB = 1024.0 * 1024.0;
constexpr double kKiB = 1024.0;

enum Stream : std::uint64_t {
    kTraffic = 1,
    kInfra = 2,
    kPopulation = 3,
    kProcess = 4,
    kMalwareTiming = 5,
    kMalwareNoise = 6,
};

// One benign catalog entry. Rates are per request/second reaching the VM.
struct CatalogEntry {
    const char* name;
    const char* cmdline;
    bool core;          // present on every app VM image
    double presence;    // per-tick probability of being alive
    int inst_lo, inst_hi;
    double worker_rate;  // >0: one extra instance per this many req/s
    double cpu_user, cpu_user_slope;
    double cpu_sys, cpu_sys_slope;
    double rss_mb, rss_slope;
    double virt_mb;
    double read_kbs, read_slope;
    double write_kbs, write_slope;
    double threads, threads_slope;
    double fds, fds_slope;
};

// clang-format off
const CatalogEntry kCatalog[] = {
    // name                cmdline                                            core  pres  lo hi wrk   cpu_u  slope   cpu_s  slope   rss   slope  virt   rd    slope  wr    slope  thr   slope fd    slope
    {"systemd",            "/sbin/init",                                      true, 1.0,  1, 1, 0,    0.002, 0,      0.001, 0,      11,   0,     168,   0.5,  0,     0.2,  0,     1,    0,    90,   0},
    {"systemd-journald",   "/lib/systemd/systemd-journald",                   true, 1.0,  1, 1, 0,    0.002, 0.0004, 0.002, 0.0003, 48,   0.002, 120,   0,    0,     18,   1.5,   1,    0,    30,   0},
    {"systemd-logind",     "/lib/systemd/systemd-logind",                     true, 1.0,  1, 1, 0,    0.0005,0,      0.0003,0,      7,    0,     18,    0,    0,     0,    0,     1,    0,    22,   0},
    {"systemd-udevd",      "/lib/systemd/systemd-udevd",                      true, 1.0,  1, 1, 0,    0.0002,0,      0.0002,0,      6,    0,     22,    0,    0,     0,    0,     1,    0,    14,   0},
    {"systemd-networkd",   "/lib/systemd/systemd-networkd",                   true, 1.0,  1, 1, 0,    0.0004,0.00002,0.0003,0,      8,    0,     24,    0,    0,     0,    0,     1,    0,    18,   0},
    {"systemd-resolved",   "/lib/systemd/systemd-resolved",                   true, 1.0,  1, 1, 0,    0.001, 0.0001, 0.0005,0.00005,12,   0,     25,    0,    0,     0,    0,     1,    0,    20,   0.2},
    {"dbus-daemon",        "/usr/bin/dbus-daemon --system",                   true, 1.0,  1, 1, 0,    0.0006,0,      0.0004,0,      5,    0,     9,     0,    0,     0,    0,     1,    0,    28,   0},
    {"cron",               "/usr/sbin/cron -f",                               true, 1.0,  1, 1, 0,    0.0001,0,      0.0001,0,      3,    0,     8,     0,    0,     0,    0,     1,    0,    7,    0},
    {"rsyslogd",           "/usr/sbin/rsyslogd -n -iNONE",                    true, 1.0,  1, 1, 0,    0.001, 0.0003, 0.001, 0.0002, 5,    0,     220,   0,    0,     6,    1.2,   4,    0,    12,   0},
    {"sshd",               "/usr/sbin/sshd -D",                               true, 1.0,  1, 1, 0,    0.0001,0,      0.0001,0,      6,    0,     15,    0,    0,     0,    0,     1,    0,    6,    0},
    {"agetty",             "/sbin/agetty -o -p -- \\u --noclear tty1 linux",  true, 1.0,  1, 1, 0,    0.0,   0,      0.0,   0,      2,    0,     8,     0,    0,     0,    0,     1,    0,    5,    0},
    {"java",               "/usr/bin/java -Xmx2g -jar /opt/app/orders.jar",   true, 1.0,  1, 1, 0,    0.04,  0.030,  0.01,  0.006,  900,  0.004, 3400,  40,   12,    25,   9,     48,   1.2,  180,  4},
    {"php-fpm7.4",         "php-fpm: master process (/etc/php/7.4/fpm/php-fpm.conf)", true, 1.0, 1, 1, 0, 0.001, 0.0001, 0.001, 0,  22,   0,     260,   0,    0,     0,    0,     1,    0,    10,   0},
    {"php-fpm7.4",         "php-fpm: pool www",                               true, 1.0,  2, 2, 4,    0.008, 0.006,  0.002, 0.001,  38,   0.01,  270,   8,    3,     2,    1,     1,    0,    12,   0.4},
    {"node_exporter",      "/usr/local/bin/node_exporter",                    true, 1.0,  1, 1, 0,    0.003, 0,      0.001, 0,      18,   0,     720,   2,    0,     0,    0,     7,    0,    11,   0},
    {"kthreadd",           "[kthreadd]",                                      true, 1.0,  1, 1, 0,    0.0,   0,      0.0001,0,      0,    0,     0,     0,    0,     0,    0,     1,    0,    0,    0},
    {"ksoftirqd/0",        "[ksoftirqd/0]",                                   true, 1.0,  1, 1, 0,    0.0,   0,      0.002, 0.0008, 0,    0,     0,     0,    0,     0,    0,     1,    0,    0,    0},
    {"jbd2/vda1-8",        "[jbd2/vda1-8]",                                   true, 1.0,  1, 1, 0,    0.0,   0,      0.0005,0.0001, 0,    0,     0,     0,    0,     30,   4,     1,    0,    0,    0},
    // optional services
    {"atd",                "/usr/sbin/atd -f",                                false,1.0,  1, 1, 0,    0.0,   0,      0.0,   0,      2,    0,     7,     0,    0,     0,    0,     1,    0,    5,    0},
    {"irqbalance",         "/usr/sbin/irqbalance --foreground",               false,1.0,  1, 1, 0,    0.0003,0.00005,0.0002,0,      4,    0,     80,    0,    0,     0,    0,     2,    0,    6,    0},
    {"polkitd",            "/usr/lib/policykit-1/polkitd --no-debug",         false,1.0,  1, 1, 0,    0.0001,0,      0.0001,0,      9,    0,     230,   0,    0,     0,    0,     3,    0,    10,   0},
    {"chronyd",            "/usr/sbin/chronyd -F 1",                          false,1.0,  1, 1, 0,    0.0002,0,      0.0002,0,      3,    0,     10,    0,    0,     0.1,  0,     1,    0,    6,    0},
    {"filebeat",           "/usr/share/filebeat/bin/filebeat --path.home /usr/share/filebeat", false, 1.0, 1, 1, 0, 0.004, 0.0008, 0.001, 0.0002, 70, 0.002, 1300, 10, 1.5, 3, 0.3, 12, 0, 26, 0.3},
    {"containerd",         "/usr/bin/containerd",                             false,1.0,  1, 1, 0,    0.002, 0,      0.001, 0,      45,   0,     1500,  1,    0,     1,    0,     14,   0,    40,   0},
    {"dockerd",            "/usr/bin/dockerd -H fd://",                       false,1.0,  1, 1, 0,    0.002, 0,      0.001, 0,      80,   0,     1700,  1,    0,     2,    0,     18,   0,    60,   0},
    {"collectd",           "/usr/sbin/collectd",                              false,1.0,  1, 1, 0,    0.003, 0,      0.002, 0,      6,    0,     400,   4,    0,     1,    0,     6,    0,    12,   0},
    {"zabbix_agentd",      "/usr/sbin/zabbix_agentd -c /etc/zabbix/zabbix_agentd.conf", false, 1.0, 3, 5, 0, 0.0005, 0, 0.0005, 0, 4, 0, 80, 0.2, 0, 0, 0, 1, 0, 8, 0},
    {"master",             "/usr/lib/postfix/sbin/master -w",                 false,1.0,  1, 1, 0,    0.0,   0,      0.0001,0,      4,    0,     40,    0,    0,     0,    0,     1,    0,    22,   0},
    {"qmgr",               "qmgr -l -t unix -u",                              false,1.0,  1, 1, 0,    0.0,   0,      0.0,   0,      4,    0,     40,    0,    0,     0,    0,     1,    0,    10,   0},
    {"pickup",             "pickup -l -t unix -u -c",                         false,0.9,  1, 1, 0,    0.0,   0,      0.0,   0,      4,    0,     40,    0,    0,     0,    0,     1,    0,    8,    0},
    {"haveged",            "/usr/sbin/haveged --Foreground --verbose=1 -w 1024", false, 1.0, 1, 1, 0, 0.0005, 0, 0.0002, 0,      4,    0,     8,     0,    0,     0,    0,     1,    0,    5,    0},
    {"memcached",          "/usr/bin/memcached -m 256 -p 11211 -u memcache",  false,1.0,  1, 1, 0,    0.002, 0.0015, 0.002, 0.0012, 60,   0.01,  400,   0,    0,     0,    0,     10,   0,    40,   1.5},
    {"supervisord",        "/usr/bin/python3 /usr/bin/supervisord -n -c /etc/supervisor/supervisord.conf", false, 1.0, 1, 1, 0, 0.0005, 0, 0.0002, 0, 22, 0, 60, 0, 0, 0.2, 0, 1, 0, 9, 0},
    {"celery",             "/opt/venv/bin/python3 -m celery -A tasks worker", false,1.0,  2, 4, 0,    0.003, 0.002,  0.001, 0.0005, 95,   0.003, 420,   1,    0.5,   2,    0.4,   3,    0,    16,   0.2},
    {"gunicorn",           "/opt/venv/bin/gunicorn api:app -w 3",             false,1.0,  3, 3, 0,    0.004, 0.004,  0.001, 0.001,  75,   0.004, 300,   2,    0.6,   1,    0.4,   1,    0,    14,   0.5},
    {"nginx",              "nginx: master process /usr/sbin/nginx -g daemon on; master_process on;", false, 1.0, 1, 1, 0, 0.0002, 0, 0.0002, 0, 3, 0, 60, 0, 0, 0, 0, 1, 0, 8, 0},
    {"nginx",              "nginx: worker process",                           false,1.0,  2, 2, 0,    0.002, 0.0025, 0.002, 0.002,  9,    0.002, 62,    6,    2.5,   4,    1.8,   1,    0,    20,   2},
    {"redis-server",       "/usr/bin/redis-server 127.0.0.1:6379",            false,1.0,  1, 1, 0,    0.002, 0.0012, 0.002, 0.001,  30,   0.01,  60,    0,    0,     12,   0.8,   4,    0,    32,   1},
    {"telegraf",           "/usr/bin/telegraf -config /etc/telegraf/telegraf.conf", false, 1.0, 1, 1, 0, 0.006, 0, 0.002, 0,   60,   0,     1200,  2,    0,     1,    0,     11,   0,    18,   0},
    {"fluentd",            "/opt/td-agent/bin/ruby /opt/td-agent/bin/fluentd --under-supervisor", false, 1.0, 1, 1, 0, 0.004, 0.0006, 0.001, 0.0002, 110, 0.002, 800, 12, 1.2, 6, 0.6, 10, 0, 30, 0.2},
    {"mysqlrouter",        "/usr/bin/mysqlrouter -c /etc/mysqlrouter/mysqlrouter.conf", false, 1.0, 1, 1, 0, 0.001, 0.0015, 0.001, 0.0012, 14, 0.004, 900, 0, 0, 0, 0, 24, 0.2, 30, 1.5},
    {"snapd",              "/usr/lib/snapd/snapd",                            false,1.0,  1, 1, 0,    0.0008,0,      0.0004,0,      30,   0,     1300,  0.5,  0,     0.2,  0,     12,   0,    16,   0},
    {"multipathd",         "/sbin/multipathd -d -s",                          false,1.0,  1, 1, 0,    0.0005,0,      0.0008,0,      18,   0,     280,   0,    0,     0,    0,     7,    0,    12,   0},
    {"accounts-daemon",    "/usr/lib/accountsservice/accounts-daemon",        false,1.0,  1, 1, 0,    0.0,   0,      0.0,   0,      7,    0,     240,   0,    0,     0,    0,     3,    0,    11,   0},
    {"unattended-upgr",    "/usr/bin/python3 /usr/share/unattended-upgrades/unattended-upgrade-shutdown --wait-for-signal", false, 1.0, 1, 1, 0, 0.0, 0, 0.0, 0, 20, 0, 110, 0, 0, 0, 0, 2, 0, 6, 0},
    {"amazon-ssm-agent",   "/usr/bin/amazon-ssm-agent",                       false,1.0,  1, 1, 0,    0.001, 0,      0.0005,0,      24,   0,     1400,  0.5,  0,     0.3,  0,     10,   0,    14,   0},
    {"ntpd",               "/usr/sbin/ntpd -p /var/run/ntpd.pid -g -u 110:116", false, 1.0, 1, 1, 0, 0.0001, 0, 0.0002, 0,     4,    0,     70,    0,    0,     0,    0,     2,    0,    9,    0},
    {"ksoftirqd/1",        "[ksoftirqd/1]",                                   false,1.0,  1, 1, 0,    0.0,   0,      0.002, 0.0008, 0,    0,     0,     0,    0,     0,    0,     1,    0,    0,    0},
    {"rcu_sched",          "[rcu_sched]",                                     false,1.0,  1, 1, 0,    0.0,   0,      0.0015,0.0002, 0,    0,     0,     0,    0,     0,    0,     1,    0,    0,    0},
    {"migration/0",        "[migration/0]",                                   false,1.0,  1, 1, 0,    0.0,   0,      0.0001,0,      0,    0,     0,     0,    0,     0,    0,     1,    0,    0,    0},
    {"kcompactd0",         "[kcompactd0]",                                    false,1.0,  1, 1, 0,    0.0,   0,      0.0001,0,      0,    0,     0,     0,    0,     0,    0,     1,    0,    0,    0},
    {"kswapd0",            "[kswapd0]",                                       false,1.0,  1, 1, 0,    0.0,   0,      0.0002,0.00005,0,    0,     0,     0,    0,     0,    0,     1,    0,    0,    0},
    {"kworker/0:1H",       "[kworker/0:1H-kblockd]",                          false,1.0,  1, 1, 0,    0.0,   0,      0.0004,0.0001, 0,    0,     0,     0,    0,     0,    0,     1,    0,    0,    0},
    {"kworker/u4:2",       "[kworker/u4:2-events_unbound]",                   false,0.8,  1, 1, 0,    0.0,   0,      0.0008,0.0002, 0,    0,     0,     0,    0,     0,    0,     1,    0,    0,    0},
    {"kworker/1:0",        "[kworker/1:0-events]",                            false,0.7,  1, 1, 0,    0.0,   0,      0.0005,0.0001, 0,    0,     0,     0,    0,     0,    0,     1,    0,    0,    0},
    // short-lived jobs and sessions
    {"sh",                 "/bin/sh -c /usr/local/bin/healthcheck.sh",        false,0.5,  1, 1, 0,    0.001, 0,      0.002, 0,      1,    0,     4,     2,    0,     0,    0,     1,    0,    4,    0},
    {"curl",               "curl -fsS http://localhost:8080/health",          false,0.5,  1, 1, 0,    0.002, 0,      0.003, 0,      9,    0,     60,    0,    0,     0,    0,     1,    0,    6,    0},
    {"logrotate",          "/usr/sbin/logrotate /etc/logrotate.conf",         false,0.1,  1, 1, 0,    0.01,  0,      0.02,  0,      3,    0,     10,    400,  0,     300,  0,     1,    0,    8,    0},
    {"run-parts",          "run-parts --report /etc/cron.hourly",             false,0.05, 1, 1, 0,    0.0005,0,      0.001, 0,      2,    0,     6,     4,    0,     0,    0,     1,    0,    4,    0},
    {"sshd",               "sshd: deploy@pts/0",                              false,0.3,  1, 1, 0,    0.0005,0,      0.0005,0,      7,    0,     16,    0,    0,     0,    0,     1,    0,    9,    0},
    {"bash",               "-bash",                                           false,0.3,  1, 1, 0,    0.0,   0,      0.0,   0,      5,    0,     10,    0,    0,     0,    0,     1,    0,    4,    0},
    {"python3",            "/usr/bin/python3 /opt/app/bin/rotate_tokens.py",  false,0.15, 1, 1, 0,    0.03,  0,      0.005, 0,      28,   0,     40,    20,   0,     10,   0,     1,    0,    7,    0},
    {"gzip",               "gzip -6",                                         false,0.1,  1, 1, 0,    0.2,   0,      0.01,  0,      2,    0,     8,     900,  0,     260,  0,     1,    0,    4,    0},
    {"apt.systemd.dai",    "/bin/sh /usr/lib/apt/apt.systemd.daily update",   false,0.03, 1, 1, 0,    0.001, 0,      0.001, 0,      2,    0,     6,     2,    0,     1,    0,     1,    0,    4,    0},
};
// clang-format on

constexpr std::size_t kCatalogSize = sizeof(kCatalog) / sizeof(kCatalog[0]);

const std::array<MalwareFootprint, 7> kFootprints = [] {
    std::array<MalwareFootprint, 7> t{};
    auto set = [](MalwareFootprint& m, double cu, double cs, double rss_mb, double virt_mb, double rd_kbs,
                  double wr_kbs, double threads, double fds) {
        m.values = {cu, cs, rss_mb * kMiB, virt_mb * kMiB, rd_kbs * kKiB, wr_kbs * kKiB,
                    rd_kbs * kKiB / 16384.0, wr_kbs * kKiB / 8192.0, threads, fds};
    };
    set(t[0], 0.97, 0.03, 180, 620, 2, 1, 4, 14);        // CpuMiner
    set(t[1], 0.25, 0.08, 22, 300, 4, 40, 3, 26);        // BeaconBackdoor
    t[1].beacon_period_ticks = 3;
    set(t[2], 0.25, 0.35, 40, 210, 1, 1, 32, 900);       // PortScanner
    set(t[3], 0.60, 0.20, 90, 260, 40000, 40000, 8, 64); // RansomIo
    set(t[4], 0.12, 0.06, 60, 350, 500, 6000, 6, 40);    // TrojanDownloader
    set(t[5], 0.20, 0.08, 30, 140, 400, 600, 4, 150);    // Worm
    t[5].instances = 4;
    set(t[6], 0.50, 0.20, 150, 700, 1500, 2000, 12, 120); // ProcessInjector
    return t;
}();

double lognormal_noise(Rng& rng, double sigma) {
    std::normal_distribution<double> n(0.0, sigma);
    return std::exp(n(rng));
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void scale_tier(Tier& tier, ScaleAction action, StackState& stack) {
    if (action == ScaleAction::ScaleUp) {
        tier.vms.push_back(Vm{stack.next_vm_id++, 0.0, false});
        tier.ticks_since_action = 0;
    } else if (action == ScaleAction::ScaleDown) {
        // newest first; the monitored VM is the oldest app VM and is never removed
        tier.vms.pop_back();
        tier.ticks_since_action = 0;
    } else if (tier.ticks_since_action != static_cast<std::size_t>(-1)) {
        ++tier.ticks_since_action;
    }
}

// Emits the benign records of the monitored VM for one tick.
void benign_records(const StackState& stack, double req_per_s, Rng& rng, std::vector<ProcessRecord>& out) {
    for (const auto& hosted : stack.population) {
        const CatalogEntry& e = kCatalog[hosted.catalog_index];
        if (e.presence < 1.0) {
            std::bernoulli_distribution alive(e.presence);
            if (!alive(rng)) continue;
        }
        int instances = e.inst_lo;
        if (e.inst_hi > e.inst_lo) {
            std::uniform_int_distribution<int> d(e.inst_lo, e.inst_hi);
            instances = d(rng);
        }
        if (e.worker_rate > 0.0) instances += static_cast<int>(req_per_s / e.worker_rate);
        for (int i = 0; i < instances; ++i) {
            std::vector<double> v(feature::count);
            v[feature::cpu_user] = (e.cpu_user + e.cpu_user_slope * req_per_s) * lognormal_noise(rng, 0.1);
            v[feature::cpu_system] = (e.cpu_sys + e.cpu_sys_slope * req_per_s) * lognormal_noise(rng, 0.1);
            v[feature::mem_rss] = e.rss_mb * kMiB * (1.0 + e.rss_slope * req_per_s) * lognormal_noise(rng, 0.02);
            v[feature::mem_virt] = e.virt_mb * kMiB * lognormal_noise(rng, 0.005);
            v[feature::io_read_bytes] = (e.read_kbs + e.read_slope * req_per_s) * kKiB * lognormal_noise(rng, 0.2);
            v[feature::io_write_bytes] = (e.write_kbs + e.write_slope * req_per_s) * kKiB * lognormal_noise(rng, 0.2);
            v[feature::io_read_ops] = v[feature::io_read_bytes] / 16384.0 * lognormal_noise(rng, 0.1);
            v[feature::io_write_ops] = v[feature::io_write_bytes] / 8192.0 * lognormal_noise(rng, 0.1);
            v[feature::threads] = std::round(e.threads + e.threads_slope * req_per_s);
            v[feature::open_fds] = std::round((e.fds + e.fds_slope * req_per_s) * lognormal_noise(rng, 0.05));
            out.push_back(ProcessRecord{e.name, e.cmdline, std::move(v)});
        }
    }
}

void malware_records(const ActiveMalware& m, std::size_t tick, Rng& rng, std::vector<ProcessRecord>& out) {
    const MalwareFootprint& fp = footprint(m.profile.category);
    const double s = m.profile.intensity;
    const bool quiet = fp.beacon_period_ticks > 0 && tick % fp.beacon_period_ticks != 0;
    for (std::size_t i = 0; i < fp.instances; ++i) {
        std::vector<double> v(feature::count);
        for (std::size_t f = 0; f < feature::count; ++f) {
            double base = fp.values[f] * s;
            const bool bursty = f == feature::cpu_user || f == feature::cpu_system ||
                                (f >= feature::io_read_bytes && f <= feature::io_write_ops);
            if (quiet && bursty) base *= 0.1;
            v[f] = base * lognormal_noise(rng, 0.05);
        }
        v[feature::threads] = std::round(fp.values[feature::threads] * s);
        v[feature::open_fds] = std::round(v[feature::open_fds]);
        out.push_back(ProcessRecord{m.key.name, m.key.cmdline, std::move(v)});
    }
}

double malware_cpu(const ActiveMalware& m) {
    const MalwareFootprint& fp = footprint(m.profile.category);
    return (fp.values[feature::cpu_user] + fp.values[feature::cpu_system]) * m.profile.intensity *
           static_cast<double>(fp.instances);
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

void TrafficModel::validate() const {
    if (!(alpha_on > 1.0 && alpha_off > 1.0)) throw ConfigError("Pareto shapes must exceed 1");
    if (!(xm_on > 0.0 && xm_off > 0.0)) throw ConfigError("Pareto minimum periods must be positive");
    if (!(lambda_on > 0.0)) throw ConfigError("ON request rate must be positive");
}

void AutoscalePolicy::validate() const {
    if (!(cpu_low > 0.0 && cpu_low < cpu_high && cpu_high < 1.0))
        throw ConfigError("autoscale thresholds need 0 < cpu_low < cpu_high < 1");
    if (!(min_vms >= 1 && min_vms <= max_vms)) throw ConfigError("autoscale bounds need 1 <= min_vms <= max_vms");
}

std::string to_string(MalwareCategory c) {
    switch (c) {
    case MalwareCategory::CpuMiner: return "cpu_miner";
    case MalwareCategory::BeaconBackdoor: return "beacon_backdoor";
    case MalwareCategory::PortScanner: return "port_scanner";
    case MalwareCategory::RansomIo: return "ransom_io";
    case MalwareCategory::TrojanDownloader: return "trojan_downloader";
    case MalwareCategory::Worm: return "worm";
    case MalwareCategory::ProcessInjector: return "process_injector";
    }
    return "?";
}

MalwareCategory category_from_string(const std::string& s) {
    for (auto c : all_categories)
        if (to_string(c) == s) return c;
    if (s == "injector") return MalwareCategory::ProcessInjector;
    throw ConfigError("unknown malware category '" + s + "'");
}

MalwareProfile MalwareProfile::for_category(MalwareCategory c, double intensity) {
    MalwareProfile p;
    p.category = c;
    p.intensity = intensity;
    switch (c) {
    case MalwareCategory::CpuMiner: p.spawn = NewProcess{"kdevtmpfsi", "/tmp/kdevtmpfsi"}; break;
    case MalwareCategory::BeaconBackdoor: p.spawn = NewProcess{"dbused", "/usr/bin/dbused -c"}; break;
    case MalwareCategory::PortScanner: p.spawn = NewProcess{"kthreaddk", "/var/tmp/kthreaddk -p 1-65535"}; break;
    case MalwareCategory::RansomIo: p.spawn = NewProcess{".svc-update", "/tmp/.svc-update --encrypt /var/www"}; break;
    case MalwareCategory::TrojanDownloader:
        p.spawn = NewProcess{"update-notifier", "/dev/shm/update-notifier --fetch"};
        break;
    case MalwareCategory::Worm: p.spawn = NewProcess{"ssh-agentd", "./ssh-agentd --spread"}; break;
    case MalwareCategory::ProcessInjector: p.spawn = InjectInto{}; break;
    }
    return p;
}

void MalwareProfile::validate() const {
    if (!(intensity >= 0.0 && intensity <= 1.0)) throw ConfigError("malware intensity must lie in [0, 1]");
    if (const auto* np = std::get_if<NewProcess>(&spawn); np != nullptr && np->name.empty())
        throw ConfigError("malware process needs a name");
}

const MalwareFootprint& footprint(MalwareCategory c) { return kFootprints[static_cast<std::size_t>(c)]; }

double pareto_from_uniform(double shape, double xm, double u) {
    if (!(shape > 1.0) || !(xm > 0.0)) throw DomainError("Pareto needs shape > 1 and xm > 0");
    if (!(u > 0.0 && u <= 1.0)) throw DomainError("Pareto uniform draw must lie in (0, 1]");
    return xm * std::pow(u, -1.0 / shape);
}

double pareto_sample(double shape, double xm, Rng& rng) {
    if (!(shape > 1.0) || !(xm > 0.0)) throw DomainError("Pareto needs shape > 1 and xm > 0");
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    return pareto_from_uniform(shape, xm, 1.0 - uni(rng));
}

TrafficState initial_traffic_state(const TrafficModel& tm, Rng& rng) {
    const double mean_on = tm.alpha_on * tm.xm_on / (tm.alpha_on - 1.0);
    const double mean_off = tm.alpha_off * tm.xm_off / (tm.alpha_off - 1.0);
    std::bernoulli_distribution start_on(mean_on / (mean_on + mean_off));
    TrafficState s;
    s.on = start_on(rng);
    s.remaining_s = s.on ? pareto_sample(tm.alpha_on, tm.xm_on, rng) : pareto_sample(tm.alpha_off, tm.xm_off, rng);
    return s;
}

TrafficTick traffic_tick(const TrafficModel& tm, TrafficState& state, double interval_s, Rng& rng) {
    TrafficTick tick;
    double left = interval_s;
    while (left > 0.0) {
        const double take = std::min(left, state.remaining_s);
        if (state.on) tick.on_seconds += take;
        state.remaining_s -= take;
        left -= take;
        if (state.remaining_s <= 0.0) {
            state.on = !state.on;
            state.remaining_s = state.on ? pareto_sample(tm.alpha_on, tm.xm_on, rng)
                                         : pareto_sample(tm.alpha_off, tm.xm_off, rng);
        }
    }
    const double mean = tm.lambda_on * tick.on_seconds;
    if (mean > 0.0) {
        std::poisson_distribution<std::uint64_t> pois(mean);
        tick.requests = pois(rng);
    }
    return tick;
}

ScaleAction autoscale_step(const TierStatus& tier, const AutoscalePolicy& policy) {
    const bool cooled = tier.ticks_since_action >= policy.cooldown_ticks;
    if (!cooled) return ScaleAction::Hold;
    if (tier.avg_cpu > policy.cpu_high && tier.size < policy.max_vms) return ScaleAction::ScaleUp;
    if (tier.avg_cpu < policy.cpu_low && tier.size > policy.min_vms) return ScaleAction::ScaleDown;
    return ScaleAction::Hold;
}

double Tier::avg_cpu() const {
    if (vms.empty()) return 0.0;
    double s = 0.0;
    for (const auto& vm : vms) s += vm.cpu;
    return s / static_cast<double>(vms.size());
}

void SimulationConfig::validate() const {
    timeline.validate();
    traffic.validate();
    policy.validate();
    malware.validate();
    if (!(min_processes >= 1 && min_processes <= max_processes))
        throw ConfigError("process population bounds need 1 <= min <= max");
    if (min_processes < catalog_core_size() || max_processes > catalog_size())
        throw ConfigError("process population must lie in [" + std::to_string(catalog_core_size()) + ", " +
                          std::to_string(catalog_size()) + "]");
    if (!(vm_cores > 0.0)) throw ConfigError("vm_cores must be positive");
}

void inject_malware(StackState& stack, const MalwareProfile& profile, double t, Rng& rng) {
    if (stack.app.vms.empty()) throw std::logic_error("cannot inject malware: app tier is empty");
    auto it = std::find_if(stack.app.vms.begin(), stack.app.vms.end(),
                           [&](const Vm& vm) { return vm.id == stack.monitored_vm; });
    if (it == stack.app.vms.end()) it = stack.app.vms.begin();
    it->infected = true;

    ActiveMalware m;
    m.profile = profile;
    m.injected_at_s = t;
    if (const auto* np = std::get_if<NewProcess>(&profile.spawn)) {
        m.key = {np->name, np->cmdline};
    } else {
        m.key = std::get<InjectInto>(profile.spawn).target;
        if (m.key.name.empty()) {
            std::vector<std::size_t> persistent;
            for (const auto& h : stack.population)
                if (kCatalog[h.catalog_index].core) persistent.push_back(h.catalog_index);
            std::uniform_int_distribution<std::size_t> pick(0, persistent.size() - 1);
            const CatalogEntry& e = kCatalog[persistent[pick(rng)]];
            m.key = {e.name, e.cmdline};
        }
    }
    stack.malware = std::move(m);
}

ExperimentResult run_experiment(const SimulationConfig& config, std::uint64_t seed, std::uint32_t experiment_id) {
    config.validate();
    const ExperimentTimeline& tl = config.timeline;

    Rng traffic_rng = make_stream(seed, kTraffic);
    Rng infra_rng = make_stream(seed, kInfra);
    // the image is shared by every experiment built from this config
    Rng population_rng = make_stream(config.image_seed, kPopulation);
    Rng process_rng = make_stream(seed, kProcess);
    Rng timing_rng = make_stream(seed, kMalwareTiming);
    Rng noise_rng = make_stream(seed, kMalwareNoise);

    StackState stack;
    for (std::size_t i = 0; i < config.policy.min_vms; ++i) {
        stack.web.vms.push_back(Vm{stack.next_vm_id++, 0.0, false});
    }
    for (std::size_t i = 0; i < config.policy.min_vms; ++i) {
        stack.app.vms.push_back(Vm{stack.next_vm_id++, 0.0, false});
    }
    stack.db.vms.push_back(Vm{stack.next_vm_id++, 0.0, false});
    stack.monitored_vm = stack.app.vms.front().id;
    stack.traffic = initial_traffic_state(config.traffic, traffic_rng);

    // the app image carries every core entry, plus a random set of optional services
    {
        std::uniform_int_distribution<std::size_t> count(config.min_processes, config.max_processes);
        const std::size_t n = count(population_rng);
        std::vector<std::size_t> optional;
        for (std::size_t i = 0; i < kCatalogSize; ++i) {
            if (kCatalog[i].core)
                stack.population.push_back({i});
            else
                optional.push_back(i);
        }
        std::shuffle(optional.begin(), optional.end(), population_rng);
        optional.resize(n - stack.population.size());
        std::sort(optional.begin(), optional.end());
        for (auto i : optional) stack.population.push_back({i});
    }

    std::uniform_real_distribution<double> inject_at(tl.benign_end_s, tl.malicious_start_s);
    const double injection_t = inject_at(timing_rng);

    ExperimentResult result;
    result.injection_t_s = injection_t;
    const std::size_t ticks = tl.tick_count();
    result.snapshots.reserve(ticks);
    result.trace.reserve(ticks);

    // request cost in core-seconds, per tier
    constexpr double kWebCost = 0.035;
    constexpr double kAppCost = 0.09;
    constexpr double kDbCost = 0.01;
    constexpr double kIdle = 0.08;

    for (std::size_t k = 0; k < ticks; ++k) {
        stack.tick = k;
        const double t = tl.tick_time(k);
        if (!stack.malware && t >= injection_t) inject_malware(stack, config.malware, t, timing_rng);
        const bool malware_live = stack.malware && config.malware.intensity > 0.0;

        const TrafficTick traffic = traffic_tick(config.traffic, stack.traffic, tl.sample_interval_s, traffic_rng);
        const double rate = static_cast<double>(traffic.requests) / tl.sample_interval_s;

        auto load_tier = [&](Tier& tier, double cost) {
            const double per_vm = rate / static_cast<double>(tier.vms.size());
            for (auto& vm : tier.vms) {
                double busy = (kIdle + per_vm * cost) * lognormal_noise(infra_rng, 0.05);
                if (vm.infected && malware_live) busy += malware_cpu(*stack.malware);
                vm.cpu = clamp01(busy / config.vm_cores);
            }
        };
        load_tier(stack.web, kWebCost);
        load_tier(stack.app, kAppCost);
        load_tier(stack.db, kDbCost);

        VmSnapshot snap;
        snap.experiment_id = experiment_id;
        snap.vm_id = stack.monitored_vm;
        snap.t = t;
        snap.label = label_for_time(t, tl);
        const double app_rate = rate / static_cast<double>(stack.app.vms.size());
        benign_records(stack, app_rate, process_rng, snap.processes);
        if (malware_live) malware_records(*stack.malware, k, noise_rng, snap.processes);
        result.snapshots.push_back(std::move(snap));

        TickTrace tr;
        tr.t = t;
        tr.requests = traffic.requests;
        tr.web_size = stack.web.vms.size();
        tr.app_size = stack.app.vms.size();
        tr.web_cpu = stack.web.avg_cpu();
        tr.app_cpu = stack.app.avg_cpu();
        tr.web_action = autoscale_step({tr.web_cpu, tr.web_size, stack.web.ticks_since_action}, config.policy);
        tr.app_action = autoscale_step({tr.app_cpu, tr.app_size, stack.app.ticks_since_action}, config.policy);
        result.trace.push_back(tr);
        scale_tier(stack.web, tr.web_action, stack);
        scale_tier(stack.app, tr.app_action, stack);
    }
    if (stack.malware) result.malware_key = stack.malware->key;
    return result;
}

std::size_t catalog_size() { return kCatalogSize; }

std::size_t catalog_core_size() {
    return static_cast<std::size_t>(
        std::count_if(std::begin(kCatalog), std::end(kCatalog), [](const CatalogEntry& e) { return e.core; }));
}

}  // namespace cloudmd::sim
