#include "naxray/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace naxray
{
namespace
{
int initial_threads()
{
    if (char const* env = std::getenv("NAXRAY_THREADS"))
    {
        try
        {
            int n = std::stoi(env);
            if (n > 0)
                return n;
        }
        catch (...)
        {
        }
    }
    return 1;
}

std::atomic<int>& threads()
{
    static std::atomic<int> n{initial_threads()};
    return n;
}
}  // namespace

int thread_count()
{
    return threads().load();
}

void set_thread_count(int n)
{
    threads().store(n > 0 ? n : 1);
}
}  // namespace naxray
