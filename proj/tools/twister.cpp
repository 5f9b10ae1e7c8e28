#include <cstdio>

int main() {
  std::puts("twister cli placeholder");
  return 0;
}
