#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "portal/config.hpp"
#include "portal/devices.hpp"
#include "portal/engine.hpp"
#include "portal/identity.hpp"
#include "portal/memory.hpp"
#include "portal/persistence.hpp"

namespace portal {

// Builds the provider set a configuration asks for. Live providers go
// through the configured transport (direct, recording or replay) and are
// wrapped with the retry policy; mocks are returned as-is.
ProviderSet build_providers(const DaemonConfig& config);

// Seams a caller (tests, the acceptance suite) may substitute.
struct AppOverrides {
    std::optional<ProviderSet> providers;
    std::shared_ptr<Clock> clock;
    std::shared_ptr<IdSource> ids;
    std::shared_ptr<Camera> camera;
    std::shared_ptr<AudioSink> audio;
};

// Owns every long-lived component of one running portal.
class PortalApp {
public:
    explicit PortalApp(DaemonConfig config, AppOverrides overrides = {});
    ~PortalApp();
    PortalApp(const PortalApp&) = delete;
    PortalApp& operator=(const PortalApp&) = delete;

    const DaemonConfig& config() const { return config_; }
    RitualEngine& engine() { return *engine_; }
    Store& store() { return *store_; }
    Registry& registry() { return *registry_; }
    MemoryStore& memory() { return *memory_; }
    LightController& light() { return *light_; }
    const ProviderSet& providers() const { return providers_; }
    Clock& clock() { return *clock_; }

    // Resolves an image reference from a client: a fixture file name
    // (under fixtures_dir) or an archived "images/..." ref. Throws
    // std::invalid_argument on anything else.
    VisionRequest resolve_image_ref(const std::string& ref) const;

    void start_light(double hz);
    void shutdown();

private:
    DaemonConfig config_;
    std::shared_ptr<Clock> clock_;
    std::shared_ptr<IdSource> ids_;
    std::unique_ptr<Store> store_;
    std::unique_ptr<Registry> registry_;
    std::unique_ptr<MemoryStore> memory_;
    std::shared_ptr<Camera> camera_;
    std::unique_ptr<LightController> light_;
    std::shared_ptr<AudioSink> audio_;
    ProviderSet providers_;
    std::unique_ptr<RitualEngine> engine_;
};

}  // namespace portal
