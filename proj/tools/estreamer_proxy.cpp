#include <csignal>
#include <string>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "estreamer/live_proxy.hpp"

using namespace estreamer;

int main(int argc, char** argv) {
  CLI::App app{"Shaping HTTP proxy"};
  proxy::ProxyConfig cfg;
  std::string listen = "127.0.0.1:8080", origin;
  double rate = 0.0;
  app.add_option("--listen", listen, "host:port to accept on");
  app.add_option("--origin", origin, "host:port for requests with a plain path");
  app.add_option("--fast-start-seconds", cfg.fast_start_seconds, "Content seconds sent before shaping");
  app.add_option("--granularity-s", cfg.granularity_s, "Search granularity");
  app.add_option("--margin-s", cfg.margin_s, "Client lead at which the next burst goes out");
  app.add_option("--rate-override-bps", rate, "Encoding rate when the origin does not announce one");
  app.add_option("--zwa-block-ms", cfg.zwa_block_ms, "Backpressure window counted as a zero window");
  app.add_option("--log", cfg.log_path, "Burst log CSV");
  CLI11_PARSE(app, argc, argv);

  try {
    std::tie(cfg.listen_host, cfg.listen_port) = proxy::split_host_port(listen);
    if (!origin.empty()) cfg.origin = origin;
    if (rate > 0) cfg.rate_override_bps = rate;

    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    std::signal(SIGPIPE, SIG_IGN);

    proxy::LiveProxy p(cfg);
    p.start();
    int sig = 0;
    sigwait(&set, &sig);
    spdlog::info("signal {}, shutting down", sig);
    p.stop();
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
