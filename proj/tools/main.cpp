#include <cstdio>

int main() {
  std::puts("mlcsc: placeholder");
  return 0;
}
