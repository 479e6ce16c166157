// CLI entry point (placeholder during bring-up).
int main() { return 0; }
