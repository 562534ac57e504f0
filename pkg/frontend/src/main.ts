import { ApiClient } from './api';
import { createApp } from './app';

const base = new URLSearchParams(location.search).get('server') ?? 'http://127.0.0.1:8008';
const app = createApp(document.getElementById('root') as HTMLElement, new ApiClient(base));
void app.refreshCatalog();
