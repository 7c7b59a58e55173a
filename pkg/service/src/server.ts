import { buildApp, DEFAULT_CONFIG, ServiceConfig } from "./app";

function parseArgs(argv: string[]): ServiceConfig {
  const config = { ...DEFAULT_CONFIG };
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case "--port":
        config.port = Number(argv[++i]);
        break;
      case "--host":
        config.host = argv[++i];
        break;
      case "--max-payload-bytes":
        config.maxPayloadBytes = Number(argv[++i]);
        break;
      default:
        console.error(`unknown flag: ${argv[i]}`);
        process.exit(1);
    }
  }
  return config;
}

function main(): void {
  const config = parseArgs(process.argv.slice(2));
  const app = buildApp(config);
  const server = app.listen(config.port, config.host, () => {
    const address = server.address();
    const port = typeof address === "object" && address ? address.port : config.port;
    console.log(`listening on port ${port}`);
  });
  for (const signal of ["SIGINT", "SIGTERM"] as const) {
    process.on(signal, () => server.close(() => process.exit(0)));
  }
}

main();
