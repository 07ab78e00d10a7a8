#include "csisim/scene.hpp"

#include <set>
#include <stdexcept>
#include <string>

namespace csisim {

void Scene::validate() const {
    if (n_subcarriers < 2) throw std::invalid_argument("scene: n_subcarriers must be >= 2");
    if (n_antennas < 2) throw std::invalid_argument("scene: n_antennas must be >= 2");
    if (spacing() <= 0.0) throw std::invalid_argument("scene: antenna spacing must be > 0");
    if (bandwidth <= 0.0) throw std::invalid_argument("scene: bandwidth must be > 0");
    if (f_center <= bandwidth / 2.0) throw std::invalid_argument("scene: f_center too small for bandwidth");
    if (receivers.empty()) throw std::invalid_argument("scene: at least one receiver required");
    if (packet_rate <= 0.0) throw std::invalid_argument("scene: packet_rate must be > 0");
    std::set<int> ids;
    for (const auto& rx : receivers) {
        if (!ids.insert(rx.id).second)
            throw std::invalid_argument("scene: duplicate receiver id " + std::to_string(rx.id));
    }
}

std::vector<double> Scene::subcarrier_frequencies() const {
    std::vector<double> f(static_cast<std::size_t>(n_subcarriers));
    const double f0 = f_center - bandwidth / 2.0;
    const double step = bandwidth / static_cast<double>(n_subcarriers - 1);
    for (int n = 0; n < n_subcarriers; ++n) f[static_cast<std::size_t>(n)] = f0 + step * n;
    return f;
}

const ReceiverSpec& Scene::receiver(int id) const {
    for (const auto& rx : receivers)
        if (rx.id == id) return rx;
    throw std::invalid_argument("scene: unknown receiver id " + std::to_string(id));
}

} // namespace csisim
