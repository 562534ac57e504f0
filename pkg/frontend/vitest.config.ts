import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'jsdom',
    globalSetup: './tests/global-setup.ts',
    testTimeout: 120000,
    hookTimeout: 180000,
  },
});
